#pragma once

// Time-tag event model and its serialized forms.
//
// Binary layout (little-endian):
//   header: magic "QTAG" | u16 version=1 | u16 header_len | u64 sync_period_ps
//           | u64 origin_ps | u32 record_count (0xFFFFFFFF when streamed)
//   record: u64 timestamp_ps | u8 channel | u8 marker | u16 reserved  (12 bytes)
//
// A CSV twin (timestamp_ps,channel,marker) exists for interoperability.
// Timestamps are unsigned picoseconds from the run origin and must be
// non-decreasing within a stream.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfc {

// Channel conventions.
constexpr uint8_t kChannelVisible = 0;    // pre-conversion / visible detector
constexpr uint8_t kChannelTelecomA = 1;
constexpr uint8_t kChannelTelecomB = 2;
constexpr uint8_t kChannelSync = 255;

// Truth markers, carried for validation only. Estimators must never read
// them: analysis results are identical with all marker bits zeroed.
constexpr uint8_t kMarkerSignal = 0x01;
constexpr uint8_t kMarkerNoise = 0x02;
constexpr uint8_t kMarkerDark = 0x04;

struct TimeTagRecord {
    uint64_t timestamp_ps = 0;
    uint8_t channel = 0;
    uint8_t marker = 0;
    uint16_t reserved = 0;

    friend bool operator==(const TimeTagRecord& a, const TimeTagRecord& b) {
        return a.timestamp_ps == b.timestamp_ps && a.channel == b.channel &&
               a.marker == b.marker && a.reserved == b.reserved;
    }
};

struct StreamHeader {
    uint16_t version = 1;
    uint64_t sync_period_ps = 1;
    uint64_t origin_ps = 0;

    friend bool operator==(const StreamHeader& a, const StreamHeader& b) {
        return a.version == b.version && a.sync_period_ps == b.sync_period_ps &&
               a.origin_ps == b.origin_ps;
    }
};

struct TimeTagStream {
    StreamHeader header;
    std::vector<TimeTagRecord> records;

    friend bool operator==(const TimeTagStream& a, const TimeTagStream& b) {
        return a.header == b.header && a.records == b.records;
    }
};

// Error taxonomy. The CLI maps StreamError to the data-format exit code.
struct StreamError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct FormatError : StreamError {
    using StreamError::StreamError;
};
struct TruncationError : StreamError {
    TruncationError(const std::string& what, uint64_t offset)
        : StreamError(what), byte_offset(offset) {}
    uint64_t byte_offset = 0;
};
struct OrderError : StreamError {
    using StreamError::StreamError;
};
struct HeaderMismatchError : StreamError {
    using StreamError::StreamError;
};

namespace detail {

constexpr char kMagic[4] = {'Q', 'T', 'A', 'G'};
constexpr uint16_t kVersion = 1;
constexpr uint16_t kHeaderLen = 28;
constexpr uint32_t kStreamedCount = 0xFFFFFFFFu;
constexpr size_t kRecordSize = 12;

template <typename T>
inline void put_le(char* p, T v) {
    for (size_t i = 0; i < sizeof(T); ++i)
        p[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
}

template <typename T>
inline T get_le(const char* p) {
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i)
        v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

inline void encode_record(char* p, const TimeTagRecord& r) {
    put_le<uint64_t>(p, r.timestamp_ps);
    p[8] = static_cast<char>(r.channel);
    p[9] = static_cast<char>(r.marker);
    put_le<uint16_t>(p + 10, r.reserved);
}

inline TimeTagRecord decode_record(const char* p) {
    TimeTagRecord r;
    r.timestamp_ps = get_le<uint64_t>(p);
    r.channel = static_cast<uint8_t>(p[8]);
    r.marker = static_cast<uint8_t>(p[9]);
    r.reserved = get_le<uint16_t>(p + 10);
    return r;
}

inline void encode_header(char* p, const StreamHeader& h, uint32_t count) {
    std::memcpy(p, kMagic, 4);
    put_le<uint16_t>(p + 4, h.version);
    put_le<uint16_t>(p + 6, kHeaderLen);
    put_le<uint64_t>(p + 8, h.sync_period_ps);
    put_le<uint64_t>(p + 16, h.origin_ps);
    put_le<uint32_t>(p + 24, count);
}

}  // namespace detail

/// Writes header + records in the binary layout. The stream must be ordered;
/// returns the number of records written.
inline size_t write_timetags(const TimeTagStream& stream, std::ostream& out) {
    if (stream.header.sync_period_ps == 0)
        throw FormatError("sync period must be > 0");
    if (stream.records.size() >= detail::kStreamedCount)
        throw FormatError("record count exceeds the fixed-count header field");

    char header[detail::kHeaderLen];
    detail::encode_header(header, stream.header,
                          static_cast<uint32_t>(stream.records.size()));
    out.write(header, detail::kHeaderLen);

    constexpr size_t kChunkRecords = 1 << 16;
    std::vector<char> buf(kChunkRecords * detail::kRecordSize);
    uint64_t prev = 0;
    bool first = true;
    size_t i = 0;
    while (i < stream.records.size()) {
        const size_t n = std::min(kChunkRecords, stream.records.size() - i);
        for (size_t j = 0; j < n; ++j) {
            const TimeTagRecord& r = stream.records[i + j];
            if (!first && r.timestamp_ps < prev)
                throw OrderError("unordered records at index " +
                                 std::to_string(i + j));
            prev = r.timestamp_ps;
            first = false;
            detail::encode_record(buf.data() + j * detail::kRecordSize, r);
        }
        out.write(buf.data(), static_cast<std::streamsize>(n * detail::kRecordSize));
        i += n;
    }
    if (!out) throw StreamError("write failed");
    return stream.records.size();
}

/// Incremental binary writer for streams too large to materialize. Uses the
/// streamed record-count sentinel.
class TimeTagWriter {
public:
    TimeTagWriter(std::ostream& out, const StreamHeader& header)
        : out_(out) {
        char h[detail::kHeaderLen];
        detail::encode_header(h, header, detail::kStreamedCount);
        out_.write(h, detail::kHeaderLen);
        buf_.reserve(kChunk * detail::kRecordSize);
    }
    ~TimeTagWriter() { flush(); }

    void append(const TimeTagRecord& r) {
        if (count_ > 0 && r.timestamp_ps < prev_)
            throw OrderError("unordered records at index " + std::to_string(count_));
        prev_ = r.timestamp_ps;
        char rec[detail::kRecordSize];
        detail::encode_record(rec, r);
        buf_.insert(buf_.end(), rec, rec + detail::kRecordSize);
        ++count_;
        if (buf_.size() >= kChunk * detail::kRecordSize) flush();
    }

    void flush() {
        if (!buf_.empty()) {
            out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
            buf_.clear();
        }
    }

    uint64_t count() const { return count_; }

private:
    static constexpr size_t kChunk = 1 << 16;
    std::ostream& out_;
    std::vector<char> buf_;
    uint64_t prev_ = 0;
    uint64_t count_ = 0;
};

/// Incremental binary reader; validates ordering as it goes.
class TimeTagReader {
public:
    explicit TimeTagReader(std::istream& in) : in_(in) {
        char h[detail::kHeaderLen];
        in_.read(h, 8);
        if (in_.gcount() != 8 || std::memcmp(h, detail::kMagic, 4) != 0)
            throw FormatError("bad magic: not a QTAG file");
        const uint16_t version = detail::get_le<uint16_t>(h + 4);
        if (version != detail::kVersion)
            throw FormatError("unsupported version " + std::to_string(version));
        const uint16_t header_len = detail::get_le<uint16_t>(h + 6);
        if (header_len < detail::kHeaderLen)
            throw FormatError("header too short");
        std::vector<char> rest(header_len - 8);
        in_.read(rest.data(), static_cast<std::streamsize>(rest.size()));
        if (in_.gcount() != static_cast<std::streamsize>(rest.size()))
            throw TruncationError("file truncated inside header",
                                  static_cast<uint64_t>(8 + in_.gcount()));
        header_.version = version;
        header_.sync_period_ps = detail::get_le<uint64_t>(rest.data());
        header_.origin_ps = detail::get_le<uint64_t>(rest.data() + 8);
        declared_ = detail::get_le<uint32_t>(rest.data() + 16);
        if (header_.sync_period_ps == 0)
            throw FormatError("sync period must be > 0");
        offset_ = header_len;
    }

    const StreamHeader& header() const { return header_; }
    bool streamed() const { return declared_ == detail::kStreamedCount; }
    uint32_t declared_count() const { return declared_; }

    /// Reads up to max_records into out (replacing its contents); returns the
    /// number read; 0 signals end of stream.
    size_t read_chunk(std::vector<TimeTagRecord>& out, size_t max_records) {
        out.clear();
        if (done_) return 0;
        size_t want = max_records;
        if (!streamed()) {
            const uint64_t remaining = declared_ - read_;
            if (remaining == 0) {
                done_ = true;
                return 0;
            }
            want = static_cast<size_t>(std::min<uint64_t>(want, remaining));
        }
        buf_.resize(want * detail::kRecordSize);
        in_.read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        const size_t got = static_cast<size_t>(in_.gcount());
        if (got % detail::kRecordSize != 0)
            throw TruncationError(
                "file truncated mid-record at byte offset " +
                    std::to_string(offset_ + got - got % detail::kRecordSize),
                offset_ + got - got % detail::kRecordSize);
        const size_t n = got / detail::kRecordSize;
        if (n < want) {
            if (!streamed() && read_ + n < declared_)
                throw TruncationError(
                    "file ends before declared record count at byte offset " +
                        std::to_string(offset_ + got),
                    offset_ + got);
            done_ = true;
        }
        out.resize(n);
        for (size_t j = 0; j < n; ++j) {
            out[j] = detail::decode_record(buf_.data() + j * detail::kRecordSize);
            if (have_prev_ && out[j].timestamp_ps < prev_)
                throw OrderError("ordering violation at record " +
                                 std::to_string(read_ + j));
            prev_ = out[j].timestamp_ps;
            have_prev_ = true;
        }
        read_ += n;
        offset_ += n * detail::kRecordSize;
        return n;
    }

private:
    std::istream& in_;
    StreamHeader header_;
    uint32_t declared_ = 0;
    uint64_t read_ = 0;
    uint64_t offset_ = 0;
    uint64_t prev_ = 0;
    bool have_prev_ = false;
    bool done_ = false;
    std::vector<char> buf_;
};

/// Reads a whole stream; validates magic, version, truncation and ordering.
inline TimeTagStream read_timetags(std::istream& in) {
    TimeTagReader reader(in);
    TimeTagStream stream;
    stream.header = reader.header();
    if (!reader.streamed()) stream.records.reserve(reader.declared_count());
    std::vector<TimeTagRecord> chunk;
    while (reader.read_chunk(chunk, 1 << 16) > 0)
        stream.records.insert(stream.records.end(), chunk.begin(), chunk.end());
    return stream;
}

/// CSV twin: "timestamp_ps,channel,marker" with a header row.
inline size_t write_timetags_csv(const TimeTagStream& stream, std::ostream& out) {
    out << "timestamp_ps,channel,marker\n";
    uint64_t prev = 0;
    bool first = true;
    for (const TimeTagRecord& r : stream.records) {
        if (!first && r.timestamp_ps < prev) throw OrderError("unordered records");
        prev = r.timestamp_ps;
        first = false;
        out << r.timestamp_ps << ',' << unsigned(r.channel) << ','
            << unsigned(r.marker) << '\n';
    }
    if (!out) throw StreamError("write failed");
    return stream.records.size();
}

/// Reads the CSV twin. Header metadata is not carried by CSV; sync period and
/// origin must be supplied by the caller.
inline TimeTagStream read_timetags_csv(std::istream& in, const StreamHeader& header) {
    TimeTagStream stream;
    stream.header = header;
    std::string line;
    size_t lineno = 0;
    uint64_t prev = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.rfind("timestamp_ps", 0) == 0) continue;
        TimeTagRecord r;
        unsigned channel = 0, marker = 0;
        std::istringstream ls(line);
        char c1 = 0, c2 = 0;
        if (!(ls >> r.timestamp_ps >> c1 >> channel >> c2 >> marker) ||
            c1 != ',' || c2 != ',')
            throw FormatError("bad CSV record at line " + std::to_string(lineno));
        r.channel = static_cast<uint8_t>(channel);
        r.marker = static_cast<uint8_t>(marker);
        if (!first && r.timestamp_ps < prev)
            throw OrderError("ordering violation at line " + std::to_string(lineno));
        prev = r.timestamp_ps;
        first = false;
        stream.records.push_back(r);
    }
    return stream;
}

/// Sorted union of two streams with identical headers. Stable for equal
/// timestamps: records of `a` precede records of `b`.
inline TimeTagStream merge_streams(const TimeTagStream& a, const TimeTagStream& b) {
    if (!(a.header == b.header))
        throw HeaderMismatchError("cannot merge streams with different headers");
    TimeTagStream out;
    out.header = a.header;
    out.records.reserve(a.records.size() + b.records.size());
    size_t i = 0, j = 0;
    while (i < a.records.size() && j < b.records.size()) {
        if (b.records[j].timestamp_ps < a.records[i].timestamp_ps)
            out.records.push_back(b.records[j++]);
        else
            out.records.push_back(a.records[i++]);
    }
    out.records.insert(out.records.end(), a.records.begin() + i, a.records.end());
    out.records.insert(out.records.end(), b.records.begin() + j, b.records.end());
    return out;
}

// Path helpers; ".csv" selects the text twin.
inline bool has_csv_extension(const std::string& path) {
    return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

inline void save_timetags(const TimeTagStream& stream, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StreamError("cannot open " + path + " for writing");
    if (has_csv_extension(path))
        write_timetags_csv(stream, out);
    else
        write_timetags(stream, out);
}

inline TimeTagStream load_timetags(const std::string& path,
                                   const StreamHeader& csv_header = StreamHeader{}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StreamError("cannot open " + path);
    return has_csv_extension(path) ? read_timetags_csv(in, csv_header)
                                   : read_timetags(in);
}

}  // namespace qfc
