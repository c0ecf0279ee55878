#include "canids/can_frame.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>

namespace canids {

namespace {

constexpr std::uint32_t kExtendedWireFlag = 1u << 31;
constexpr char kHexDigits[] = "0123456789ABCDEF";

std::optional<std::uint8_t> hex_value(char c) {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    return std::nullopt;
}

std::optional<std::uint64_t> parse_decimal(std::string_view s) {
    if (s.empty()) return std::nullopt;
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ' || s.back() == '\t'))
        s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

template <typename T>
void put_le(std::vector<std::byte>& out, T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<std::byte>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::span<const std::byte> in) {
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
        value |= static_cast<std::uint64_t>(std::to_integer<std::uint8_t>(in[i])) << (8 * i);
    return static_cast<T>(value);
}

}  // namespace

CanFrame CanFrame::make(CanId id, std::span<const std::uint8_t> payload,
                        std::uint64_t timestamp_ns, bool extended) {
    if (payload.size() > kMaxDlc)
        throw Error(ErrorCode::PayloadTooLong, std::to_string(payload.size()) + " bytes");
    if (id >= (extended ? kExtendedIdLimit : kStandardIdLimit))
        throw Error(ErrorCode::InvalidArgument, "CAN id out of range for frame format");
    CanFrame f;
    f.timestamp_ns = timestamp_ns;
    f.can_id = id;
    f.extended = extended;
    f.dlc = static_cast<std::uint8_t>(payload.size());
    std::copy(payload.begin(), payload.end(), f.data.begin());
    return f;
}

bool CanFrame::valid() const noexcept {
    if (dlc > kMaxDlc) return false;
    if (can_id >= (extended ? kExtendedIdLimit : kStandardIdLimit)) return false;
    return std::all_of(data.begin() + dlc, data.end(), [](std::uint8_t b) { return b == 0; });
}

CanFrame parse_log_line(std::string_view line) {
    line = trim(line);
    auto malformed = [&](const char* why) {
        return Error(ErrorCode::MalformedLine, std::string(why) + " in '" + std::string(line) + "'");
    };

    if (line.size() < 2 || line.front() != '(') throw malformed("missing timestamp");
    const auto close = line.find(')');
    if (close == std::string_view::npos) throw malformed("unterminated timestamp");
    const auto stamp = line.substr(1, close - 1);
    const auto dot = stamp.find('.');
    if (dot == std::string_view::npos) throw malformed("timestamp without fraction");
    const auto secs = parse_decimal(stamp.substr(0, dot));
    const auto frac = stamp.substr(dot + 1);
    const auto micros = parse_decimal(frac);
    if (!secs || !micros || frac.size() != 6) throw malformed("bad timestamp");

    auto rest = line.substr(close + 1);
    if (rest.empty() || rest.front() != ' ') throw malformed("missing interface");
    rest = trim(rest);
    const auto space = rest.find_first_of(" \t");
    if (space == std::string_view::npos || space == 0) throw malformed("missing frame field");
    auto body = trim(rest.substr(space));
    if (body.find_first_of(" \t") != std::string_view::npos) throw malformed("trailing fields");

    const auto hash = body.find('#');
    if (hash == std::string_view::npos) throw malformed("missing '#'");
    const auto id_hex = body.substr(0, hash);
    const auto data_hex = body.substr(hash + 1);

    if (id_hex.size() != 3 && id_hex.size() != 8)
        throw Error(ErrorCode::BadIdWidth, "identifier '" + std::string(id_hex) + "' is not 3 or 8 hex digits");
    CanId id = 0;
    for (char c : id_hex) {
        auto v = hex_value(c);
        if (!v) throw malformed("non-hex identifier");
        id = (id << 4) | *v;
    }
    const bool extended = id_hex.size() == 8;
    if (id >= (extended ? kExtendedIdLimit : kStandardIdLimit)) throw malformed("identifier out of range");

    if (data_hex.size() % 2 != 0) throw malformed("odd payload length");
    if (data_hex.size() > 2 * kMaxDlc)
        throw Error(ErrorCode::PayloadTooLong, std::to_string(data_hex.size() / 2) + " bytes");

    CanFrame f;
    f.timestamp_ns = *secs * 1'000'000'000ull + *micros * 1'000ull;
    f.can_id = id;
    f.extended = extended;
    f.dlc = static_cast<std::uint8_t>(data_hex.size() / 2);
    for (std::size_t i = 0; i < f.dlc; ++i) {
        auto hi = hex_value(data_hex[2 * i]);
        auto lo = hex_value(data_hex[2 * i + 1]);
        if (!hi || !lo) throw malformed("non-hex payload");
        f.data[i] = static_cast<std::uint8_t>((*hi << 4) | *lo);
    }
    return f;
}

std::string format_log_line(const CanFrame& frame, std::string_view iface) {
    const std::uint64_t micros_total = frame.timestamp_ns / 1'000;
    std::string secs = std::to_string(micros_total / 1'000'000);
    std::string frac = std::to_string(micros_total % 1'000'000);
    frac.insert(0, 6 - frac.size(), '0');

    std::string out;
    out.reserve(secs.size() + iface.size() + 40);
    out += '(';
    out += secs;
    out += '.';
    out += frac;
    out += ") ";
    out += iface;
    out += ' ';
    const int digits = frame.extended ? 8 : 3;
    for (int shift = 4 * (digits - 1); shift >= 0; shift -= 4) out += kHexDigits[(frame.can_id >> shift) & 0xF];
    out += '#';
    for (std::size_t i = 0; i < frame.dlc; ++i) {
        out += kHexDigits[frame.data[i] >> 4];
        out += kHexDigits[frame.data[i] & 0xF];
    }
    return out;
}

std::vector<CanFrame> read_log_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<CanFrame> frames;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            frames.push_back(parse_log_line(line));
        } catch (const Error& e) {
            throw LogLineError(e.code(), line_no, e.what());
        }
    }
    if (in.bad()) throw Error(ErrorCode::IoError, "read failed on " + path.string());
    return frames;
}

void write_log_file(const std::filesystem::path& path, std::span<const CanFrame> frames,
                    std::string_view iface) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
    for (const auto& f : frames) out << format_log_line(f, iface) << '\n';
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

std::vector<std::byte> serialize_batch(const FrameBatch& batch) {
    std::vector<std::byte> out;
    out.reserve(serialized_size(batch.frames.size()));
    for (char c : {'C', 'A', 'N', 'B'}) out.push_back(static_cast<std::byte>(c));
    out.push_back(static_cast<std::byte>(kBatchWireVersion));
    put_le<std::uint64_t>(out, batch.window_index);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.frames.size()));
    for (const auto& f : batch.frames) {
        put_le<std::uint64_t>(out, f.timestamp_ns);
        put_le<std::uint32_t>(out, f.can_id | (f.extended ? kExtendedWireFlag : 0u));
        out.push_back(static_cast<std::byte>(f.dlc));
        for (std::size_t i = 0; i < 8; ++i)
            out.push_back(static_cast<std::byte>(i < f.dlc ? f.data[i] : 0));
    }
    return out;
}

std::uint32_t read_batch_header(std::span<const std::byte> header) {
    if (header.size() < kBatchHeaderSize)
        throw Error(ErrorCode::TruncatedPayload, "header needs 17 bytes, got " + std::to_string(header.size()));
    if (std::memcmp(header.data(), "CANB", 4) != 0) throw Error(ErrorCode::BadMagic, "expected 'CANB'");
    if (std::to_integer<std::uint8_t>(header[4]) != kBatchWireVersion)
        throw Error(ErrorCode::BadVersion,
                    "unsupported version " + std::to_string(std::to_integer<int>(header[4])));
    return get_le<std::uint32_t>(header.subspan(13, 4));
}

FrameBatch deserialize_batch(std::span<const std::byte> bytes) {
    const std::uint32_t count = read_batch_header(bytes);
    if (bytes.size() < serialized_size(count))
        throw Error(ErrorCode::TruncatedPayload, "declared " + std::to_string(count) + " frames, have " +
                                                     std::to_string(bytes.size()) + " bytes");
    FrameBatch batch;
    batch.window_index = get_le<std::uint64_t>(bytes.subspan(5, 8));
    batch.frames.reserve(count);
    auto cursor = bytes.subspan(kBatchHeaderSize);
    for (std::uint32_t i = 0; i < count; ++i, cursor = cursor.subspan(kWireFrameSize)) {
        CanFrame f;
        f.timestamp_ns = get_le<std::uint64_t>(cursor);
        const auto raw_id = get_le<std::uint32_t>(cursor.subspan(8, 4));
        f.extended = (raw_id & kExtendedWireFlag) != 0;
        f.can_id = raw_id & ~kExtendedWireFlag;
        f.dlc = std::to_integer<std::uint8_t>(cursor[12]);
        if (f.dlc > kMaxDlc) throw Error(ErrorCode::PayloadTooLong, "frame " + std::to_string(i));
        for (std::size_t b = 0; b < f.dlc; ++b) f.data[b] = std::to_integer<std::uint8_t>(cursor[13 + b]);
        batch.frames.push_back(f);
    }
    if (!batch.frames.empty()) {
        batch.first_collect_ns = batch.frames.front().timestamp_ns;
        batch.last_collect_ns = batch.frames.back().timestamp_ns;
    }
    return batch;
}

}  // namespace canids
