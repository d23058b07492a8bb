#pragma once

// Three-endpoint message-passing harness: a source and two measuring
// stations wired through a coordinator. The wiring mode decides whether
// the stations' settings ever reach the source (RETRO) or never do
// (CAUSAL), turning the two information-flow diagrams into an explicit
// protocol choice. Transport is any reliable ordered byte stream; frames
// are a 4-byte little-endian length prefix followed by a one-line JSON
// record {v, kind, trial, payload}.

#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <cstdint>
#include <cstring>
#include <exception>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "core.hpp"
#include "models.hpp"

namespace bellsim {

enum class Wiring { causal, retro };

inline std::string_view wiring_name(Wiring w) {
    return w == Wiring::causal ? "CAUSAL" : "RETRO";
}

enum class MessageKind { hello, setting, emit, photon, result, done };

inline std::string_view kind_name(MessageKind k) {
    switch (k) {
        case MessageKind::hello: return "HELLO";
        case MessageKind::setting: return "SETTING";
        case MessageKind::emit: return "EMIT";
        case MessageKind::photon: return "PHOTON";
        case MessageKind::result: return "RESULT";
        case MessageKind::done: return "DONE";
    }
    throw std::logic_error("unreachable");
}

inline MessageKind kind_from_name(std::string_view s) {
    if (s == "HELLO") return MessageKind::hello;
    if (s == "SETTING") return MessageKind::setting;
    if (s == "EMIT") return MessageKind::emit;
    if (s == "PHOTON") return MessageKind::photon;
    if (s == "RESULT") return MessageKind::result;
    if (s == "DONE") return MessageKind::done;
    throw std::invalid_argument("unknown message kind: " + std::string(s));
}

/// Payload: a role name (HELLO), an angle in radians (SETTING, PHOTON), an
/// outcome (RESULT), or nothing (EMIT, DONE).
struct WireMessage {
    int version = 1;
    MessageKind kind = MessageKind::hello;
    std::uint64_t trial = 0;
    std::variant<std::monostate, std::string, double, int> payload;

    static WireMessage hello(std::string role) {
        return {1, MessageKind::hello, 0, std::move(role)};
    }
    static WireMessage setting(std::uint64_t trial, Angle x) {
        return {1, MessageKind::setting, trial, x.radians()};
    }
    static WireMessage emit(std::uint64_t trial) { return {1, MessageKind::emit, trial, {}}; }
    static WireMessage photon(std::uint64_t trial, Angle lam) {
        return {1, MessageKind::photon, trial, lam.radians()};
    }
    static WireMessage result(std::uint64_t trial, Outcome o) {
        return {1, MessageKind::result, trial, o.value()};
    }
    static WireMessage done() { return {1, MessageKind::done, 0, {}}; }

    Angle angle_payload() const {
        if (const double* d = std::get_if<double>(&payload))
            return Angle::from_radians(*d);
        throw std::invalid_argument("message carries no angle payload");
    }
    Outcome outcome_payload() const {
        if (const int* v = std::get_if<int>(&payload)) return Outcome::from_int(*v);
        throw std::invalid_argument("message carries no outcome payload");
    }
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

/// Minimal scanner for the flat one-line records this module writes. Not a
/// general JSON parser; accepts the fields in any order.
struct FieldScanner {
    std::string_view text;

    std::optional<std::string_view> raw(std::string_view key) const {
        std::string needle = "\"" + std::string(key) + "\":";
        std::size_t pos = text.find(needle);
        if (pos == std::string_view::npos) return std::nullopt;
        std::size_t start = pos + needle.size();
        std::size_t end = start;
        if (start < text.size() && text[start] == '"') {
            end = text.find('"', start + 1);
            if (end == std::string_view::npos)
                throw std::invalid_argument("unterminated string in record");
            return text.substr(start + 1, end - start - 1);
        }
        while (end < text.size() && text[end] != ',' && text[end] != '}') ++end;
        return text.substr(start, end - start);
    }

    bool is_string(std::string_view key) const {
        std::string needle = "\"" + std::string(key) + "\":";
        std::size_t pos = text.find(needle);
        return pos != std::string_view::npos &&
               pos + needle.size() < text.size() && text[pos + needle.size()] == '"';
    }

    double number(std::string_view key) const {
        auto v = raw(key);
        if (!v) throw std::invalid_argument("missing field: " + std::string(key));
        double out = 0.0;
        auto res = std::from_chars(v->data(), v->data() + v->size(), out);
        if (res.ec != std::errc{})
            throw std::invalid_argument("bad number in field: " + std::string(key));
        return out;
    }
};

}  // namespace detail

inline std::string encode_message(const WireMessage& m) {
    std::string out = "{\"v\":";
    out += std::to_string(m.version);
    out += ",\"kind\":\"";
    out += kind_name(m.kind);
    out += "\",\"trial\":";
    out += std::to_string(m.trial);
    out += ",\"payload\":";
    if (const auto* s = std::get_if<std::string>(&m.payload)) {
        out += '"';
        out += *s;
        out += '"';
    } else if (const auto* d = std::get_if<double>(&m.payload)) {
        detail::append_double(out, *d);
    } else if (const auto* i = std::get_if<int>(&m.payload)) {
        out += std::to_string(*i);
    } else {
        out += "null";
    }
    out += '}';
    return out;
}

inline WireMessage decode_message(std::string_view text) {
    detail::FieldScanner scan{text};
    WireMessage m;
    m.version = static_cast<int>(scan.number("v"));
    if (m.version != 1)
        throw std::invalid_argument("unsupported message version " +
                                    std::to_string(m.version));
    auto kind = scan.raw("kind");
    if (!kind) throw std::invalid_argument("missing field: kind");
    m.kind = kind_from_name(*kind);
    m.trial = static_cast<std::uint64_t>(scan.number("trial"));
    auto payload = scan.raw("payload");
    if (!payload) throw std::invalid_argument("missing field: payload");
    if (scan.is_string("payload")) {
        m.payload = std::string(*payload);
    } else if (*payload == "null") {
        m.payload = std::monostate{};
    } else if (m.kind == MessageKind::result) {
        m.payload = static_cast<int>(scan.number("payload"));
    } else {
        m.payload = scan.number("payload");
    }
    return m;
}

/// A reliable ordered byte stream. read() blocks and returns 0 at EOF.
class ByteChannel {
public:
    virtual ~ByteChannel() = default;
    virtual void write(const void* data, std::size_t n) = 0;
    virtual std::size_t read(void* data, std::size_t n) = 0;

    void read_exact(void* data, std::size_t n) {
        auto* p = static_cast<char*>(data);
        while (n > 0) {
            std::size_t got = read(p, n);
            if (got == 0) throw ProtocolError("channel closed mid-frame");
            p += got;
            n -= got;
        }
    }
};

/// Channel over a file descriptor (socketpair or TCP socket), with a
/// buffered reader. Owns and closes the descriptor.
class FdChannel final : public ByteChannel {
public:
    explicit FdChannel(int fd) : fd_(fd) {}
    FdChannel(const FdChannel&) = delete;
    FdChannel& operator=(const FdChannel&) = delete;
    ~FdChannel() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void write(const void* data, std::size_t n) override {
        const char* p = static_cast<const char*>(data);
        while (n > 0) {
            ssize_t wrote = ::write(fd_, p, n);
            if (wrote < 0) throw ProtocolError("channel write failed");
            p += wrote;
            n -= static_cast<std::size_t>(wrote);
        }
    }

    std::size_t read(void* data, std::size_t n) override {
        if (pos_ == fill_) {
            ssize_t got = ::read(fd_, buffer_, sizeof buffer_);
            if (got < 0) throw ProtocolError("channel read failed");
            if (got == 0) return 0;
            pos_ = 0;
            fill_ = static_cast<std::size_t>(got);
        }
        std::size_t take = std::min(n, fill_ - pos_);
        std::memcpy(data, buffer_ + pos_, take);
        pos_ += take;
        return take;
    }

private:
    int fd_;
    char buffer_[1 << 14];
    std::size_t pos_ = 0, fill_ = 0;
};

/// Connected pair of byte streams backed by a Unix socketpair.
inline std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>>
make_channel_pair() {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0)
        throw std::runtime_error("socketpair failed");
    return {std::make_unique<FdChannel>(fds[0]), std::make_unique<FdChannel>(fds[1])};
}

inline void write_frame(ByteChannel& ch, const WireMessage& m) {
    std::string body = encode_message(m);
    std::uint32_t len = static_cast<std::uint32_t>(body.size());
    char frame[4];
    frame[0] = static_cast<char>(len & 0xff);
    frame[1] = static_cast<char>((len >> 8) & 0xff);
    frame[2] = static_cast<char>((len >> 16) & 0xff);
    frame[3] = static_cast<char>((len >> 24) & 0xff);
    std::string out;
    out.reserve(body.size() + 4);
    out.append(frame, 4);
    out += body;
    ch.write(out.data(), out.size());
}

/// Reads one length-prefixed frame; empty optional at clean EOF.
inline std::optional<WireMessage> read_frame(ByteChannel& ch) {
    unsigned char len_bytes[4];
    std::size_t got = ch.read(len_bytes, 1);
    if (got == 0) return std::nullopt;
    ch.read_exact(len_bytes + 1, 3);
    std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                        (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                        (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                        (static_cast<std::uint32_t>(len_bytes[3]) << 24);
    if (len > (1u << 20)) throw ProtocolError("oversized frame");
    std::string body(len, '\0');
    ch.read_exact(body.data(), len);
    return decode_message(body);
}

// ---------------------------------------------------------------------------
// Transcript

/// One delivered message as seen by the coordinator: which endpoint, which
/// direction, in total arrival order.
struct TranscriptRecord {
    std::uint64_t seq = 0;
    std::string endpoint;  // "source", "left", "right"
    bool to_endpoint = false;
    WireMessage message;
};

class TranscriptSink {
public:
    virtual ~TranscriptSink() = default;
    virtual void on_record(const TranscriptRecord& record) = 0;
};

class MemoryTranscript final : public TranscriptSink {
public:
    void on_record(const TranscriptRecord& record) override { records.push_back(record); }
    std::vector<TranscriptRecord> records;
};

inline std::string encode_transcript_record(const TranscriptRecord& r) {
    std::string out = "{\"seq\":";
    out += std::to_string(r.seq);
    out += ",\"endpoint\":\"";
    out += r.endpoint;
    out += "\",\"dir\":\"";
    out += r.to_endpoint ? "to" : "from";
    out += "\",\"msg\":";
    out += encode_message(r.message);
    out += '}';
    return out;
}

inline TranscriptRecord decode_transcript_record(std::string_view line) {
    detail::FieldScanner scan{line};
    TranscriptRecord r;
    r.seq = static_cast<std::uint64_t>(scan.number("seq"));
    auto endpoint = scan.raw("endpoint");
    auto dir = scan.raw("dir");
    if (!endpoint || !dir) throw std::invalid_argument("malformed transcript record");
    r.endpoint = std::string(*endpoint);
    r.to_endpoint = *dir == "to";
    std::size_t msg_pos = line.find("\"msg\":");
    if (msg_pos == std::string_view::npos)
        throw std::invalid_argument("malformed transcript record: no msg");
    std::string_view msg = line.substr(msg_pos + 6);
    if (!msg.empty() && msg.back() == '}') msg.remove_suffix(1);  // outer brace
    r.message = decode_message(msg);
    return r;
}

/// Persists the transcript as newline-delimited records in arrival order.
class FileTranscript final : public TranscriptSink {
public:
    explicit FileTranscript(const std::string& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open transcript file: " + path);
    }
    void on_record(const TranscriptRecord& record) override {
        out_ << encode_transcript_record(record) << '\n';
    }

private:
    std::ofstream out_;
};

inline std::vector<TranscriptRecord> load_transcript(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open transcript file: " + path);
    std::vector<TranscriptRecord> records;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) records.push_back(decode_transcript_record(line));
    return records;
}

/// Incremental auditor: feed records in order, then finish(). The verdict
/// is derived purely from message order — did any SETTING reach the source
/// before its trial's EMIT? Incomplete transcripts raise ProtocolError.
class TranscriptAuditor {
public:
    void feed(const TranscriptRecord& r) {
        if (!r.to_endpoint && !seen_hello_.contains(r.endpoint)) {
            if (r.message.kind != MessageKind::hello)
                throw ProtocolError("endpoint " + r.endpoint +
                                    " spoke before HELLO: " +
                                    std::string(kind_name(r.message.kind)));
            seen_hello_.insert(r.endpoint);
        }
        if (r.to_endpoint && r.endpoint == "source" &&
            r.message.kind == MessageKind::setting)
            setting_reached_source_ = true;
        if (r.to_endpoint && r.message.kind == MessageKind::done)
            done_count_++;
        count_++;
    }

    Wiring finish() const {
        if (count_ == 0) throw ProtocolError("empty transcript");
        if (done_count_ < 3) throw ProtocolError("truncated transcript: missing DONE");
        return setting_reached_source_ ? Wiring::retro : Wiring::causal;
    }

private:
    std::set<std::string> seen_hello_;
    bool setting_reached_source_ = false;
    int done_count_ = 0;
    std::uint64_t count_ = 0;
};

inline Wiring transcript_audit(std::span<const TranscriptRecord> records) {
    TranscriptAuditor auditor;
    for (const auto& r : records) auditor.feed(r);
    return auditor.finish();
}

// ---------------------------------------------------------------------------
// Endpoints

/// The hidden-variable law available to a CAUSAL source: either uniform on
/// [0, pi) or a finite atom set. A RETRO source ignores this and draws from
/// the four-atom settings-dependent law instead.
struct SourceLaw {
    bool uniform = false;
    AngleDistribution atoms;
};

inline SourceLaw uniform_source_law() { return SourceLaw{true, {}}; }

struct SourceConfig {
    Wiring wiring = Wiring::causal;
    SourceLaw law;
    std::uint64_t seed = 0;
};

/// Source endpoint message loop. In CAUSAL mode a SETTING arriving here is
/// a wiring violation and aborts with a ProtocolError naming the message.
inline void run_source(ByteChannel& ch, const SourceConfig& cfg) {
    write_frame(ch, WireMessage::hello("source"));
    std::optional<Angle> left_setting, right_setting;
    while (auto msg = read_frame(ch)) {
        switch (msg->kind) {
            case MessageKind::setting: {
                if (cfg.wiring == Wiring::causal)
                    throw ProtocolError(
                        "wiring violation: SETTING (trial " +
                        std::to_string(msg->trial) + ") delivered to a CAUSAL source");
                // arrival order within a trial: left setting first, then right
                if (!left_setting)
                    left_setting = msg->angle_payload();
                else
                    right_setting = msg->angle_payload();
                break;
            }
            case MessageKind::emit: {
                RandomStream stream(cfg.seed, 3 * msg->trial);
                Angle lam;
                if (cfg.wiring == Wiring::retro) {
                    if (!left_setting || !right_setting)
                        throw ProtocolError("EMIT before both SETTINGs at RETRO source");
                    lam = sample_atom(
                        retro_lambda_law(RetroVariant::symmetric, *left_setting,
                                         *right_setting),
                        stream);
                    left_setting.reset();
                    right_setting.reset();
                } else if (cfg.law.uniform) {
                    lam = stream.next_angle();
                } else {
                    lam = sample_atom(cfg.law.atoms, stream);
                }
                write_frame(ch, WireMessage::photon(msg->trial, lam));
                break;
            }
            case MessageKind::done:
                return;
            default:
                throw ProtocolError("unexpected message at source: " +
                                    std::string(kind_name(msg->kind)));
        }
    }
    throw ProtocolError("source channel closed without DONE");
}

/// Station endpoint: stores its private setting, applies Malus' law to each
/// incoming photon, and reports the outcome. Never sees the other station.
inline void run_station(ByteChannel& ch, const std::string& role, std::uint64_t seed) {
    write_frame(ch, WireMessage::hello(role));
    const std::uint64_t stream_offset = role == "left" ? 1 : 2;
    std::optional<Angle> setting;
    while (auto msg = read_frame(ch)) {
        switch (msg->kind) {
            case MessageKind::setting:
                setting = msg->angle_payload();
                break;
            case MessageKind::photon: {
                if (!setting) throw ProtocolError("PHOTON before SETTING at " + role);
                RandomStream stream(seed, 3 * msg->trial + stream_offset);
                Outcome out = stream.next_outcome(
                    malus_prob(Outcome::plus(), *setting, msg->angle_payload()));
                write_frame(ch, WireMessage::result(msg->trial, out));
                break;
            }
            case MessageKind::done:
                return;
            default:
                throw ProtocolError("unexpected message at " + role + ": " +
                                    std::string(kind_name(msg->kind)));
        }
    }
    throw ProtocolError("station channel closed without DONE");
}

// ---------------------------------------------------------------------------
// Coordinator

using SettingsSchedule = std::vector<std::pair<Angle, Angle>>;

namespace detail {

/// Coordinator-side view of one endpoint: records every frame it relays.
struct RecordedChannel {
    ByteChannel* channel = nullptr;
    std::string endpoint;
    TranscriptSink* sink = nullptr;
    std::uint64_t* seq = nullptr;

    void send(const WireMessage& m) const {
        write_frame(*channel, m);
        record(m, true);
    }
    WireMessage receive() const {
        auto msg = read_frame(*channel);
        if (!msg) throw ProtocolError("endpoint " + endpoint + " closed unexpectedly");
        record(*msg, false);
        return *msg;
    }
    void record(const WireMessage& m, bool to_endpoint) const {
        if (sink) sink->on_record(TranscriptRecord{(*seq)++, endpoint, to_endpoint, m});
    }
};

}  // namespace detail

/// Runs the full three-endpoint experiment in one process: the source and
/// both stations run on their own threads over real byte streams, and the
/// coordinator serializes trials (no pipelining), so transcripts are
/// totally ordered. Endpoint failures (including wiring violations)
/// propagate out of this call.
inline TrialSet run_wire_experiment(Wiring wiring, const SourceLaw& source_law,
                                    const SettingsSchedule& schedule, std::uint64_t seed,
                                    TranscriptSink* sink = nullptr) {
    auto [source_near, source_far] = make_channel_pair();
    auto [left_near, left_far] = make_channel_pair();
    auto [right_near, right_far] = make_channel_pair();

    std::exception_ptr source_error, left_error, right_error;
    SourceConfig source_cfg{wiring, source_law, seed};

    std::thread source_thread([&, ch = std::move(source_far)]() mutable {
        try {
            run_source(*ch, source_cfg);
        } catch (...) {
            source_error = std::current_exception();
        }
    });
    std::thread left_thread([&, ch = std::move(left_far)]() mutable {
        try {
            run_station(*ch, "left", seed);
        } catch (...) {
            left_error = std::current_exception();
        }
    });
    std::thread right_thread([&, ch = std::move(right_far)]() mutable {
        try {
            run_station(*ch, "right", seed);
        } catch (...) {
            right_error = std::current_exception();
        }
    });

    TrialSet trials;
    std::exception_ptr coordinator_error;
    std::uint64_t seq = 0;
    try {
        detail::RecordedChannel source{source_near.get(), "source", sink, &seq};
        detail::RecordedChannel left{left_near.get(), "left", sink, &seq};
        detail::RecordedChannel right{right_near.get(), "right", sink, &seq};

        for (auto* ep : {&source, &left, &right}) {
            WireMessage hello = ep->receive();
            if (hello.kind != MessageKind::hello)
                throw ProtocolError("expected HELLO from " + ep->endpoint);
        }

        trials.reserve(schedule.size());
        for (std::uint64_t i = 0; i < schedule.size(); ++i) {
            auto [a, b] = schedule[i];
            left.send(WireMessage::setting(i, a));
            right.send(WireMessage::setting(i, b));
            if (wiring == Wiring::retro) {
                source.send(WireMessage::setting(i, a));
                source.send(WireMessage::setting(i, b));
            }
            source.send(WireMessage::emit(i));
            WireMessage photon = source.receive();
            if (photon.kind != MessageKind::photon || photon.trial != i)
                throw ProtocolError("expected PHOTON for trial " + std::to_string(i));
            Angle lam = photon.angle_payload();

            left.send(WireMessage::photon(i, lam));
            right.send(WireMessage::photon(i, lam));
            WireMessage ra = left.receive();
            WireMessage rb = right.receive();
            if (ra.kind != MessageKind::result || rb.kind != MessageKind::result)
                throw ProtocolError("expected RESULT for trial " + std::to_string(i));

            trials.push_back(Trial{i, a, b, ra.outcome_payload(), rb.outcome_payload(),
                                   lam, wiring == Wiring::retro});
        }
        for (auto* ep : {&source, &left, &right}) ep->send(WireMessage::done());
    } catch (...) {
        coordinator_error = std::current_exception();
    }

    // closing our ends unblocks any endpoint still reading
    source_near.reset();
    left_near.reset();
    right_near.reset();
    source_thread.join();
    left_thread.join();
    right_thread.join();

    // endpoint-side diagnosis (e.g. a wiring violation) beats the
    // coordinator's secondary channel-closed error
    for (auto err : {source_error, left_error, right_error})
        if (err) std::rethrow_exception(err);
    if (coordinator_error) std::rethrow_exception(coordinator_error);
    return trials;
}

}  // namespace bellsim
