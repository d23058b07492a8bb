#pragma once

#include "core.hpp"
#include "inequalities.hpp"
#include "models.hpp"
#include "signaling.hpp"
#include "statistics.hpp"
#include "wire.hpp"
