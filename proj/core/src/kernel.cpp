#include "rsum/kernel.hpp"

#include <dlfcn.h>

#include <cstdlib>
#include <mutex>

#include "rsum/error.hpp"

namespace rsum::kernel {

std::int32_t StringTable::intern(const std::string& s) {
  auto [it, inserted] = index_.try_emplace(s, static_cast<std::int32_t>(words_.size()));
  if (inserted) words_.push_back(s);
  return it->second;
}

std::int32_t StringTable::find(const std::string& s) const {
  auto it = index_.find(s);
  return it == index_.end() ? -1 : it->second;
}

const std::string& StringTable::word(std::int32_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size())
    throw InvalidArgument("string id " + std::to_string(id) + " out of range");
  return words_[static_cast<std::size_t>(id)];
}

void Sequences::append(std::span<const std::int32_t> ids) {
  ids_.insert(ids_.end(), ids.begin(), ids.end());
  offsets_.push_back(ids_.size());
}

std::span<const std::int32_t> Sequences::item(std::size_t i) const {
  if (i >= size()) throw InvalidArgument("sequence index out of range");
  return std::span<const std::int32_t>(ids_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::size_t KernelBatch::add(std::span<const std::string> tokens) {
  std::vector<std::int32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(table->intern(t));
  sequences.append(ids);
  return sequences.size() - 1;
}

std::vector<std::string> KernelBatch::decode(std::size_t i) const {
  std::vector<std::string> out;
  for (auto id : sequences.item(i)) out.push_back(table->word(id));
  return out;
}

std::vector<std::size_t> KernelBatch::lengths() const {
  std::vector<std::size_t> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = sequences.length(i);
  return out;
}

std::shared_ptr<const FastKernel> FastKernel::open(const std::filesystem::path& path,
                                                   std::string* why) {
  auto fail = [&](std::string msg) -> std::shared_ptr<const FastKernel> {
    if (why) *why = std::move(msg);
    return nullptr;
  };
  void* raw = ::dlopen(path.c_str(), RTLD_NOW | RTLD_LOCAL);
  if (!raw) {
    const char* err = ::dlerror();
    return fail(err ? err : "dlopen failed");
  }
  std::shared_ptr<void> handle(raw, [](void* h) { ::dlclose(h); });
  auto version = reinterpret_cast<fk_abi_version_fn>(::dlsym(raw, "fk_abi_version"));
  if (!version) return fail("missing symbol fk_abi_version");
  if (const auto v = version(); v != RSUM_FK_ABI_VERSION)
    return fail("ABI version " + std::to_string(v) + ", expected " +
                std::to_string(RSUM_FK_ABI_VERSION));
  std::shared_ptr<FastKernel> k(new FastKernel());
  k->lcs_length_batch = reinterpret_cast<fk_lcs_length_batch_fn>(::dlsym(raw, "fk_lcs_length_batch"));
  k->rouge_batch = reinterpret_cast<fk_rouge_batch_fn>(::dlsym(raw, "fk_rouge_batch"));
  k->perturb_batch = reinterpret_cast<fk_perturb_batch_fn>(::dlsym(raw, "fk_perturb_batch"));
  if (!k->lcs_length_batch || !k->rouge_batch || !k->perturb_batch)
    return fail("library lacks one of the fk_* entry points");
  k->handle_ = std::move(handle);
  k->path_ = path.string();
  return k;
}

std::shared_ptr<const FastKernel> detect() {
  static std::once_flag once;
  static std::shared_ptr<const FastKernel> kernel;
  std::call_once(once, [] {
    const char* env = std::getenv("RSUM_FASTKERNEL");
    if (env && (std::string_view(env) == "off" || std::string_view(env).empty())) return;
    kernel = FastKernel::open(env ? env : "librsum_fastkernel.so");
  });
  return kernel;
}

TextKernels::TextKernels() : accel_(detect()) {}

namespace {

void check_status(std::int32_t status, const char* what) {
  switch (status) {
    case FK_OK: return;
    case FK_ALL_DROPPED: throw AllDropped(std::string(what) + ": a text would lose every word");
    case FK_EMPTY: throw EmptyText(std::string(what) + ": empty text or donor");
    default: throw InvalidArgument(std::string(what) + ": kernel returned status " + std::to_string(status));
  }
}

}  // namespace

std::vector<std::size_t> TextKernels::lcs_length_batch(
    std::span<const std::vector<std::string>> a, std::span<const std::vector<std::string>> b) const {
  if (a.size() != b.size()) throw InvalidArgument("LCS batches differ in size");
  std::vector<std::size_t> out(a.size());
  if (!accel_) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = eval::lcs_length(a[i], b[i]);
    return out;
  }
  auto table = std::make_shared<StringTable>();
  KernelBatch ka(table), kb(table);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ka.add(a[i]);
    kb.add(b[i]);
  }
  std::vector<std::uint64_t> raw(a.size());
  check_status(accel_->lcs_length_batch(ka.sequences.ids().data(), ka.sequences.offsets().data(),
                                        kb.sequences.ids().data(), kb.sequences.offsets().data(),
                                        a.size(), raw.data()),
               "lcs_length_batch");
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<std::size_t>(raw[i]);
  return out;
}

std::vector<std::vector<eval::RougeScore>> TextKernels::rouge_batch(
    std::span<const std::vector<std::string>> candidates,
    std::span<const std::vector<std::vector<std::string>>> references,
    std::span<const int> n_values, eval::MultiRef mode) const {
  if (candidates.size() != references.size())
    throw InvalidArgument("candidate and reference batches differ in size");
  for (int n : n_values)
    if (n < 0) throw InvalidArgument("n must be >= 0 (0 selects ROUGE-L)");
  for (const auto& refs : references)
    if (refs.empty()) throw InvalidArgument("at least one reference is required");

  std::vector<std::vector<eval::RougeScore>> out(candidates.size(),
                                                 std::vector<eval::RougeScore>(n_values.size()));
  if (!accel_) {
    for (std::size_t i = 0; i < candidates.size(); ++i)
      for (std::size_t j = 0; j < n_values.size(); ++j)
        out[i][j] = n_values[j] == 0 ? eval::rouge_l(candidates[i], references[i], mode)
                                     : eval::rouge_n(candidates[i], references[i], n_values[j], mode);
    return out;
  }
  auto table = std::make_shared<StringTable>();
  KernelBatch cand(table), refs(table);
  std::vector<std::uint64_t> group{0};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand.add(candidates[i]);
    for (const auto& r : references[i]) refs.add(r);
    group.push_back(refs.size());
  }
  const std::vector<std::int32_t> ns(n_values.begin(), n_values.end());
  std::vector<double> raw(candidates.size() * ns.size() * 3);
  check_status(accel_->rouge_batch(cand.sequences.ids().data(), cand.sequences.offsets().data(),
                                   candidates.size(), refs.sequences.ids().data(),
                                   refs.sequences.offsets().data(), group.data(), ns.data(),
                                   ns.size(), mode == eval::MultiRef::best_f1 ? 0 : 1, raw.data()),
               "rouge_batch");
  for (std::size_t i = 0; i < candidates.size(); ++i)
    for (std::size_t j = 0; j < ns.size(); ++j) {
      const double* t = &raw[(i * ns.size() + j) * 3];
      out[i][j] = eval::RougeScore{t[0], t[1], t[2]};
    }
  return out;
}

std::vector<perturb::PerturbationRecord> TextKernels::perturb_batch(
    std::span<const corpus::TokenizedText> texts, std::span<const corpus::TokenizedText> donors,
    const perturb::PerturbConfig& config, std::uint64_t master_seed) const {
  if (!accel_) return perturb::perturb_batch(texts, donors, config, master_seed);
  if (texts.size() != donors.size()) throw InvalidArgument("text and donor batches differ in size");
  config.validate();

  auto table = std::make_shared<StringTable>();
  KernelBatch kt(table), kd(table);
  std::uint64_t capacity = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    kt.add(texts[i].tokens);
    kd.add(donors[i].tokens);
    const std::size_t n = texts[i].size();
    capacity += n + perturb::stage_count(config.add_ratio, n);
  }
  const double ratios[3] = {config.shuffle_ratio, config.drop_ratio, config.add_ratio};
  std::vector<std::int32_t> ids(capacity);
  std::vector<std::uint64_t> off(texts.size() + 1, 0);
  std::vector<std::int32_t> status(texts.size(), FK_SKIPPED);
  const std::int32_t rc = accel_->perturb_batch(
      kt.sequences.ids().data(), kt.sequences.offsets().data(), kd.sequences.ids().data(),
      kd.sequences.offsets().data(), texts.size(), ratios, master_seed, ids.data(), ids.size(),
      off.data(), status.data());
  check_status(rc, "perturb_batch");

  std::vector<perturb::PerturbationRecord> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::vector<std::string> body;
    body.reserve(off[i + 1] - off[i]);
    for (std::uint64_t p = off[i]; p < off[i + 1]; ++p) body.push_back(table->word(ids[p]));
    perturb::PerturbationRecord rec;
    rec.original = texts[i];
    rec.perturbed = corpus::make_prompted_input(corpus::from_tokens(std::move(body)),
                                                static_cast<int>(texts[i].size()));
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace rsum::kernel
