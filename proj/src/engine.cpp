#include "callias/engine.hpp"

#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "callias/errors.hpp"

namespace callias {

namespace {

constexpr char kMagic[8] = {'C', 'L', 'S', 'P', 'E', 'C', '0', '1'};

class Writer {
 public:
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(const std::string& s) {
    i64(static_cast<std::int64_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& b, std::size_t end) : b_(b), end_(end) {}
  bool raw(void* p, std::size_t n) {
    if (pos_ + n > end_) return false;
    std::memcpy(p, b_.data() + pos_, n);
    pos_ += n;
    return true;
  }
  bool i64(std::int64_t& v) { return raw(&v, sizeof v); }
  bool f64(double& v) { return raw(&v, sizeof v); }
  bool str(std::string& s) {
    std::int64_t n;
    if (!i64(n) || n < 0 || pos_ + static_cast<std::size_t>(n) > end_) return false;
    s.assign(b_.data() + pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return true;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_spectral(const SpectralData& s, const std::string& key) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.str(kVersionTag);
  w.str(key);
  w.str(s.label);
  w.str(s.op_hash);
  w.i64(s.dim);
  w.i64(s.values.size());
  w.f64(s.zero_tol);
  w.i64(s.window ? 1 : 0);
  if (s.window) {
    w.f64(s.window->lower);
    w.f64(s.window->upper);
    w.i64(s.window->below);
    w.i64(s.window->above);
  }
  w.raw(s.values.data(), sizeof(double) * static_cast<std::size_t>(s.values.size()));
  w.raw(s.vectors.data(), sizeof(cplx) * static_cast<std::size_t>(s.vectors.size()));
  const std::string digest = sha256_hex(w.bytes());
  w.raw(digest.data(), digest.size());
  return w.bytes();
}

std::optional<SpectralData> deserialize_spectral(const std::string& b, const std::string& key,
                                                 std::string* why) {
  auto fail = [&](const char* m) -> std::optional<SpectralData> {
    if (why) *why = m;
    return std::nullopt;
  };
  if (b.size() < 64 + sizeof kMagic) return fail("truncated entry");
  const std::size_t body = b.size() - 64;
  if (sha256_hex(b.data(), body) != b.substr(body)) return fail("checksum mismatch");
  Reader r(b, body);
  char magic[8];
  if (!r.raw(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) return fail("bad magic");
  std::string tag, k;
  if (!r.str(tag) || tag != kVersionTag) return fail("version tag mismatch");
  if (!r.str(k) || k != key) return fail("key mismatch");
  SpectralData s;
  std::int64_t dim, m, has_window;
  if (!r.str(s.label) || !r.str(s.op_hash) || !r.i64(dim) || !r.i64(m) || !r.f64(s.zero_tol) ||
      !r.i64(has_window))
    return fail("truncated header");
  if (dim < 0 || m < 0 || m > dim) return fail("bad dimensions");
  if (has_window) {
    SpectralWindow w;
    std::int64_t below, above;
    if (!r.f64(w.lower) || !r.f64(w.upper) || !r.i64(below) || !r.i64(above)) return fail("truncated window");
    w.below = below;
    w.above = above;
    s.window = w;
  }
  s.dim = dim;
  s.values.resize(m);
  s.vectors.resize(dim, m);
  if (!r.raw(s.values.data(), sizeof(double) * static_cast<std::size_t>(m)) ||
      !r.raw(s.vectors.data(), sizeof(cplx) * static_cast<std::size_t>(dim * m)) || !r.done())
    return fail("truncated payload");
  return s;
}

SpectralEngine::SpectralEngine(SpectralOptions options, std::optional<std::filesystem::path> cache_dir)
    : options_(options), dir_(std::move(cache_dir)) {
  if (dir_) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw InvalidArgument("cache directory not writable: " + dir_->string());
  }
}

std::string SpectralEngine::cache_key(const BoundaryOperator& op, const SpectralOptions& o) const {
  Hasher h;
  h.update(std::string(kVersionTag));
  h.update(op.content_hash());
  h.update(static_cast<std::int64_t>(o.mode));
  h.update(static_cast<std::int64_t>(o.dense_limit));
  h.update(static_cast<std::int64_t>(o.window_count));
  h.update(o.shift);
  h.update(o.zero_tol ? *o.zero_tol : -1.0);
  h.update(o.residual_tol);
  h.update(static_cast<std::int64_t>(o.max_iterations));
  return h.hex();
}

std::shared_ptr<const SpectralData> SpectralEngine::decompose(const BoundaryOperator& op) {
  return decompose(op, options_);
}

std::shared_ptr<const SpectralData> SpectralEngine::decompose(const BoundaryOperator& op,
                                                              const SpectralOptions& o) {
  const std::string key = cache_key(op, o);
  std::shared_ptr<std::mutex> lock;
  {
    std::lock_guard<std::mutex> g(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      ++memo_hits_;
      return it->second;
    }
    auto& l = key_locks_[key];
    if (!l) l = std::make_shared<std::mutex>();
    lock = l;
  }
  std::lock_guard<std::mutex> kg(*lock);
  {
    std::lock_guard<std::mutex> g(mu_);
    auto it = memo_.find(key);
    if (it != memo_.end()) {
      ++memo_hits_;
      return it->second;
    }
  }
  std::optional<SpectralData> s = load(key);
  if (s) {
    ++cache_hits_;
    s->label = op.label();
  } else {
    ++solver_calls_;
    s = eigendecompose(op, o);
    store(key, *s);
  }
  auto ptr = std::make_shared<const SpectralData>(std::move(*s));
  std::lock_guard<std::mutex> g(mu_);
  memo_[key] = ptr;
  return ptr;
}

std::shared_ptr<const SpectralData> SpectralEngine::peek(const BoundaryOperator& op) const {
  const std::string key = cache_key(op, options_);
  std::lock_guard<std::mutex> g(mu_);
  auto it = memo_.find(key);
  return it == memo_.end() ? nullptr : it->second;
}

std::optional<SpectralData> SpectralEngine::load(const std::string& key) {
  if (!dir_) return std::nullopt;
  const auto path = *dir_ / (key + ".bin");
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string why;
  auto s = deserialize_spectral(ss.str(), key, &why);
  if (!s) warn("cache entry " + path.filename().string() + " rejected (" + why + "); recomputing");
  return s;
}

void SpectralEngine::store(const std::string& key, const SpectralData& s) {
  if (!dir_) return;
  static std::atomic<unsigned> counter{0};
  const auto final_path = *dir_ / (key + ".bin");
  const auto tmp = *dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    const std::string b = serialize_spectral(s, key);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!out) {
      warn("could not write cache entry " + tmp.string());
      return;
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) warn("could not install cache entry " + final_path.string());
}

void SpectralEngine::warn(std::string msg) {
  std::cerr << "warning: " << msg << "\n";
  std::lock_guard<std::mutex> g(mu_);
  warnings_.push_back(std::move(msg));
}

EngineStats SpectralEngine::stats() const {
  return EngineStats{solver_calls_.load(), cache_hits_.load(), memo_hits_.load()};
}

std::vector<std::string> SpectralEngine::warnings() const {
  std::lock_guard<std::mutex> g(mu_);
  return warnings_;
}

}  // namespace callias
