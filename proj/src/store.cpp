// SPDX-License-Identifier: Apache-2.0
#include "perfwatch/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <unordered_map>

namespace perfwatch {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kLogFile = "runs.log";
constexpr const char* kIndexFile = "runs.idx";
constexpr const char* kLockFile = "LOCK";
constexpr std::uint64_t kLengthPrefix = 8;

Error io_error(const std::string& what) {
  return Error(ErrorCode::kIo, what + ": " + std::strerror(errno));
}

class FileDescriptor {
 public:
  FileDescriptor() = default;
  explicit FileDescriptor(int fd) : fd_(fd) {}
  FileDescriptor(FileDescriptor&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  FileDescriptor& operator=(FileDescriptor&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  FileDescriptor(const FileDescriptor&) = delete;
  FileDescriptor& operator=(const FileDescriptor&) = delete;
  ~FileDescriptor() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::uint64_t file_size(int fd) {
  struct stat st {};
  if (::fstat(fd, &st) != 0) throw io_error("fstat");
  return static_cast<std::uint64_t>(st.st_size);
}

std::string read_exact(int fd, std::uint64_t offset, std::uint64_t length) {
  std::string buf(length, '\0');
  std::uint64_t done = 0;
  while (done < length) {
    ssize_t n = ::pread(fd, buf.data() + done, length - done, static_cast<off_t>(offset + done));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw io_error("read runs.log");
    }
    if (n == 0) throw Error(ErrorCode::kIo, "unexpected end of runs.log");
    done += static_cast<std::uint64_t>(n);
  }
  return buf;
}

void write_all(int fd, std::string_view data) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw io_error("write runs.log");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

std::uint64_t decode_length(std::string_view bytes) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
  return v;
}

std::string encode_length(std::uint64_t v) {
  std::string out(kLengthPrefix, '\0');
  for (std::size_t i = 0; i < kLengthPrefix; ++i) out[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  return out;
}

json index_line(const RunSummary& s) {
  return json{{"id", s.run_id},         {"case", s.case_name}, {"iteration", s.iteration},
              {"commit", s.commit},     {"branch", s.branch},  {"started_at", s.started_at.iso8601()},
              {"offset", s.offset},     {"length", s.length}};
}

RunSummary summarize(const RunRecord& r, std::uint64_t offset, std::uint64_t length) {
  return RunSummary{r.run_id,      r.case_name, r.iteration, r.meta.commit,
                    r.meta.branch, r.meta.started_at, offset, length};
}

bool series_before(const RunSummary& a, const RunSummary& b) {
  if (a.started_at != b.started_at) return a.started_at < b.started_at;
  return a.run_id < b.run_id;
}

std::string content_key(RunRecord record) {
  record.ingested_at = Timestamp();
  return serialize_record(record);
}

}  // namespace

std::vector<double> Series::values() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.value);
  return out;
}

struct Store::Impl {
  fs::path dir;
  Mode mode = Mode::kRead;
  FileDescriptor lock_fd;
  FileDescriptor log_fd;
  std::ofstream index_out;
  bool rebuilt = false;

  mutable std::shared_mutex mu;
  std::vector<RunSummary> entries;
  std::unordered_map<std::string, std::size_t> by_id;
  std::uint64_t covered_end = 0;

  mutable std::mutex cache_mu;
  mutable std::unordered_map<std::string, std::shared_ptr<const RunRecord>> cache;

  fs::path log_path() const { return dir / kLogFile; }
  fs::path index_path() const { return dir / kIndexFile; }

  void add_entry(RunSummary s) {
    covered_end = s.offset + kLengthPrefix + s.length;
    by_id.emplace(s.run_id, entries.size());
    entries.push_back(std::move(s));
  }

  void cache_put(const std::string& id, RunRecord record) const {
    std::lock_guard lock(cache_mu);
    cache[id] = std::make_shared<const RunRecord>(std::move(record));
  }

  // Loads runs.idx. Returns false if it is missing or disagrees with the log.
  bool load_index(std::uint64_t log_size) {
    std::ifstream in(index_path());
    if (!in) return false;
    std::vector<RunSummary> loaded;
    std::set<std::string> ids;
    std::uint64_t expected = 0;
    std::string line;
    try {
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        RunSummary s;
        s.run_id = j.at("id").get<std::string>();
        s.case_name = j.at("case").get<std::string>();
        s.iteration = j.at("iteration").get<std::int64_t>();
        s.commit = j.at("commit").get<std::string>();
        s.branch = j.at("branch").get<std::string>();
        s.started_at = Timestamp::parse(j.at("started_at").get<std::string>());
        s.offset = j.at("offset").get<std::uint64_t>();
        s.length = j.at("length").get<std::uint64_t>();
        if (s.offset != expected || !ids.insert(s.run_id).second) return false;
        expected = s.offset + kLengthPrefix + s.length;
        if (expected > log_size) return false;
        if (decode_length(read_exact(log_fd.get(), s.offset, kLengthPrefix)) != s.length) return false;
        loaded.push_back(std::move(s));
      }
    } catch (const std::exception&) {
      return false;
    }
    for (auto& s : loaded) add_entry(std::move(s));
    return true;
  }

  // Indexes complete records from covered_end up to log_size. Returns the
  // newly indexed entries.
  std::vector<RunSummary> scan_tail(std::uint64_t log_size) {
    std::vector<RunSummary> added;
    std::uint64_t pos = covered_end;
    while (pos + kLengthPrefix <= log_size) {
      std::uint64_t len = decode_length(read_exact(log_fd.get(), pos, kLengthPrefix));
      if (pos + kLengthPrefix + len > log_size) break;
      std::string text = read_exact(log_fd.get(), pos + kLengthPrefix, len);
      RunRecord record;
      try {
        record = parse_record(text);
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kIo, "corrupt record at offset " + std::to_string(pos) + " of " +
                                        log_path().string() + ": " + e.what());
      }
      RunSummary s = summarize(record, pos, len);
      if (by_id.count(s.run_id) != 0) {
        throw Error(ErrorCode::kIo, "duplicate run_id " + s.run_id + " in " + log_path().string());
      }
      cache_put(s.run_id, std::move(record));
      add_entry(s);
      added.push_back(std::move(s));
      pos = covered_end;
    }
    return added;
  }

  void open_index_for_append() {
    index_out.open(index_path(), std::ios::app);
    if (!index_out) throw io_error("open " + index_path().string());
  }

  void rewrite_index() {
    fs::path tmp = index_path();
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      for (const auto& s : entries) out << index_line(s).dump() << '\n';
      if (!out) throw io_error("write " + tmp.string());
    }
    fs::rename(tmp, index_path());
  }

  void append_index(const RunSummary& s) {
    index_out << index_line(s).dump() << '\n';
    index_out.flush();
  }

  void open_log_if_present() {
    if (log_fd) return;
    int fd = ::open(log_path().c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) {
      if (errno == ENOENT) return;
      throw io_error("open " + log_path().string());
    }
    log_fd = FileDescriptor(fd);
  }

  std::shared_ptr<const RunRecord> load(const RunSummary& s) const {
    {
      std::lock_guard lock(cache_mu);
      if (auto it = cache.find(s.run_id); it != cache.end()) return it->second;
    }
    RunRecord record = parse_record(read_exact(log_fd.get(), s.offset + kLengthPrefix, s.length));
    auto ptr = std::make_shared<const RunRecord>(std::move(record));
    std::lock_guard lock(cache_mu);
    return cache.emplace(s.run_id, ptr).first->second;
  }

  const RunSummary& find(std::string_view run_id) const {
    auto it = by_id.find(std::string(run_id));
    if (it == by_id.end()) throw Error(ErrorCode::kNotFound, "unknown run '" + std::string(run_id) + "'");
    return entries[it->second];
  }

  std::vector<RunSummary> select(std::string_view case_name, const SeriesFilter& filter) const {
    std::vector<RunSummary> out;
    for (const auto& s : entries) {
      if (s.case_name != case_name) continue;
      if (filter.branch && s.branch != *filter.branch) continue;
      if (filter.since && s.started_at < *filter.since) continue;
      out.push_back(s);
    }
    std::sort(out.begin(), out.end(), series_before);
    return out;
  }
};

Store::Store(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
Store::Store(Store&&) noexcept = default;
Store& Store::operator=(Store&&) noexcept = default;
Store::~Store() = default;

Store Store::open(const fs::path& dir, Mode mode) {
  auto impl = std::make_unique<Impl>();
  impl->dir = dir;
  impl->mode = mode;

  if (mode == Mode::kRead) {
    if (!fs::is_directory(dir)) {
      throw Error(ErrorCode::kNotFound, "store directory '" + dir.string() + "' does not exist");
    }
    impl->open_log_if_present();
    if (impl->log_fd) {
      std::uint64_t size = file_size(impl->log_fd.get());
      if (!impl->load_index(size)) {
        impl->entries.clear();
        impl->by_id.clear();
        impl->covered_end = 0;
        impl->rebuilt = true;
      }
      impl->scan_tail(size);
    }
    return Store(std::move(impl));
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "create store directory '" + dir.string() + "': " + ec.message());

  int lock = ::open((dir / kLockFile).c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock < 0) throw io_error("open LOCK");
  impl->lock_fd = FileDescriptor(lock);
  if (::flock(lock, LOCK_EX | LOCK_NB) != 0) {
    if (errno == EWOULDBLOCK) {
      throw Error(ErrorCode::kLocked, "store '" + dir.string() + "' is locked by another writer");
    }
    throw io_error("flock LOCK");
  }

  int log = ::open(impl->log_path().c_str(), O_RDWR | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (log < 0) throw io_error("open " + impl->log_path().string());
  impl->log_fd = FileDescriptor(log);

  std::uint64_t size = file_size(log);
  bool index_ok = impl->load_index(size);
  if (!index_ok) {
    impl->entries.clear();
    impl->by_id.clear();
    impl->covered_end = 0;
    impl->rebuilt = fs::exists(impl->index_path()) || size > 0;
  }
  auto added = impl->scan_tail(size);
  if (impl->covered_end < size) {
    // Torn tail left by an interrupted append; it never became a record.
    if (::ftruncate(log, static_cast<off_t>(impl->covered_end)) != 0) throw io_error("truncate runs.log");
  }
  if (!index_ok) {
    impl->rewrite_index();
  }
  impl->open_index_for_append();
  if (index_ok) {
    for (const auto& s : added) impl->append_index(s);
  }
  return Store(std::move(impl));
}

std::string Store::store_run(const RunRecord& record) {
  if (impl_->mode != Mode::kWrite) throw Error(ErrorCode::kIo, "store opened read-only");
  check_record(record);

  std::unique_lock lock(impl_->mu);
  if (auto it = impl_->by_id.find(record.run_id); it != impl_->by_id.end()) {
    auto existing = impl_->load(impl_->entries[it->second]);
    if (content_key(*existing) == content_key(record)) return record.run_id;
    throw Error(ErrorCode::kConflict, "run " + record.run_id + " already stored with different content");
  }

  std::string text = serialize_record(record);
  std::string frame = encode_length(text.size());
  frame += text;
  std::uint64_t offset = impl_->covered_end;
  try {
    write_all(impl_->log_fd.get(), frame);
    if (::fdatasync(impl_->log_fd.get()) != 0) throw io_error("sync runs.log");
  } catch (...) {
    [[maybe_unused]] int rc = ::ftruncate(impl_->log_fd.get(), static_cast<off_t>(offset));
    throw;
  }

  RunSummary s = summarize(record, offset, text.size());
  impl_->cache_put(s.run_id, parse_record(text));
  impl_->add_entry(s);
  impl_->append_index(s);
  return record.run_id;
}

void Store::refresh() {
  std::unique_lock lock(impl_->mu);
  impl_->open_log_if_present();
  if (!impl_->log_fd) return;
  impl_->scan_tail(file_size(impl_->log_fd.get()));
}

std::size_t Store::size() const {
  std::shared_lock lock(impl_->mu);
  return impl_->entries.size();
}

bool Store::contains(std::string_view run_id) const {
  std::shared_lock lock(impl_->mu);
  return impl_->by_id.count(std::string(run_id)) != 0;
}

RunRecord Store::get_run(std::string_view run_id) const {
  std::shared_lock lock(impl_->mu);
  return *impl_->load(impl_->find(run_id));
}

std::string Store::raw_record(std::string_view run_id) const {
  std::shared_lock lock(impl_->mu);
  const auto& s = impl_->find(run_id);
  return read_exact(impl_->log_fd.get(), s.offset + kLengthPrefix, s.length);
}

std::vector<std::string> Store::cases() const {
  std::shared_lock lock(impl_->mu);
  std::set<std::string> names;
  for (const auto& s : impl_->entries) names.insert(s.case_name);
  return {names.begin(), names.end()};
}

std::vector<RunSummary> Store::runs(std::string_view case_name, const SeriesFilter& filter) const {
  std::shared_lock lock(impl_->mu);
  auto out = impl_->select(case_name, filter);
  if (filter.limit && out.size() > *filter.limit) {
    out.erase(out.begin(), out.end() - static_cast<std::ptrdiff_t>(*filter.limit));
  }
  return out;
}

Series Store::query_series(std::string_view case_name, std::string_view path, std::string_view unit,
                           const SeriesFilter& filter) const {
  if (!is_valid_path(path)) {
    throw Error(ErrorCode::kBadRequest, "malformed path '" + std::string(path) + "'");
  }
  std::shared_lock lock(impl_->mu);
  Series series;
  series.case_name = std::string(case_name);
  series.path = std::string(path);
  series.unit = std::string(unit);
  bool unit_fixed = !unit.empty();

  for (const auto& s : impl_->select(case_name, filter)) {
    auto record = impl_->load(s);
    const MeasureNode* node = find_node(record->tree, path);
    if (node == nullptr) continue;
    if (!unit_fixed) {
      series.unit = node->unit;
      unit_fixed = true;
    }
    if (node->unit != series.unit) continue;
    series.points.push_back({s.run_id, s.started_at, node->value});
  }
  if (filter.limit && series.points.size() > *filter.limit) {
    series.points.erase(series.points.begin(),
                        series.points.end() - static_cast<std::ptrdiff_t>(*filter.limit));
  }
  return series;
}

const fs::path& Store::directory() const { return impl_->dir; }
bool Store::writable() const { return impl_->mode == Mode::kWrite; }
bool Store::index_rebuilt() const { return impl_->rebuilt; }

}  // namespace perfwatch
