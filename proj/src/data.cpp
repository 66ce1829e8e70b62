#include "gmenet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "gmenet/check.hpp"
#include "gmenet/random.hpp"

namespace gmenet {

namespace {

const std::array<std::string, kNumCenters> kCenterNames = {
    "TCGA", "BRATS", "RJ", "XH", "TH", "HS"};

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(c));
  return s;
}

}  // namespace

const std::string& center_name(Center c) {
  return kCenterNames[static_cast<std::size_t>(c)];
}

Center center_from_name(const std::string& name) {
  for (int i = 0; i < kNumCenters; ++i)
    if (kCenterNames[static_cast<std::size_t>(i)] == name)
      return static_cast<Center>(i);
  throw std::runtime_error("unknown center '" + name + "'");
}

bool LabelSet::who_consistent() const {
  switch (pathology) {
    case Pathology::Oligodendroglioma:
      return idh == Idh::Mutant && codel == Codel::Codeleted;
    case Pathology::Astrocytoma:
      return idh == Idh::Mutant && codel == Codel::Intact;
    case Pathology::Glioblastoma:
      return idh == Idh::Wildtype && codel == Codel::Intact;
  }
  return false;
}

LabelSet label_from_pathology(Pathology p) {
  LabelSet l;
  l.pathology = p;
  switch (p) {
    case Pathology::Oligodendroglioma:
      l.idh = Idh::Mutant;
      l.codel = Codel::Codeleted;
      break;
    case Pathology::Astrocytoma:
      l.idh = Idh::Mutant;
      l.codel = Codel::Intact;
      break;
    case Pathology::Glioblastoma:
      l.idh = Idh::Wildtype;
      l.codel = Codel::Intact;
      break;
  }
  return l;
}

void CohortConfig::validate() const {
  for (int c = 0; c < kNumCenters; ++c) {
    require(counts[c] >= 0, "cohort config: negative count");
    require(miss_fl[c] >= 0.0 && miss_fl[c] <= 1.0 && miss_t1c[c] >= 0.0 &&
                miss_t1c[c] <= 1.0,
            "cohort config: missingness rate outside [0,1]");
  }
  double prior_sum = 0.0;
  for (double p : class_prior) {
    require(p >= 0.0, "cohort config: negative class prior");
    prior_sum += p;
  }
  require(std::abs(prior_sum - 1.0) < 1e-9,
          "cohort config: class prior must sum to 1");
  require(coupling >= 0.0 && coupling <= 1.0,
          "cohort config: coupling outside [0,1]");
  require(noise >= 0.0 && center_shift >= 0.0 && class_sep >= 0.0 &&
              independent_shift_boost >= 0.0,
          "cohort config: negative scale");
  require(raw_dim > 0, "cohort config: raw_dim must be positive");
}

Dataset generate_cohort(const CohortConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const Index r = cfg.raw_dim;
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));

  // Structural parameters shared by the whole cohort. Class identity lives
  // mostly in how a sequence mixes the latent (a per-class deviation of the
  // view), plus a smaller mean offset — a purely linear readout underfits.
  std::array<MatX, 2> view;  // per sequence: raw = class_view * u + ...
  view[0] = gaussian_matrix(r, r, rng, inv_sqrt_r);
  view[1] = gaussian_matrix(r, r, rng, inv_sqrt_r);
  std::array<std::array<MatX, 3>, 2> class_view;
  std::array<std::array<RowVecX, 3>, 2> class_mean;
  for (int k = 0; k < 2; ++k) {
    for (int c = 0; c < 3; ++c) {
      class_view[k][c] = view[k] + 0.6 * cfg.class_sep *
                                       gaussian_matrix(r, r, rng, inv_sqrt_r);
      class_mean[k][c] = gaussian_row(r, rng, 0.4 * cfg.class_sep);
    }
  }
  // Imaging-protocol quality differs per center and per sequence; the
  // lognormal severity scales that sequence's offset and noise floor. The
  // held-out center's protocol deviates by the configured boost on top.
  std::array<std::array<double, kNumCenters>, 2> severity;
  std::normal_distribution<double> lognorm(0.0, 1.0);
  for (int k = 0; k < 2; ++k) {
    for (int c = 0; c < kNumCenters; ++c) {
      severity[k][c] = std::exp(0.5 * lognorm(rng));
      if (static_cast<Center>(c) == cfg.independent_center)
        severity[k][c] *= cfg.independent_shift_boost;
    }
  }
  std::array<std::array<RowVecX, kNumCenters>, 2> center_offset;
  for (int k = 0; k < 2; ++k)
    for (int c = 0; c < kNumCenters; ++c)
      center_offset[k][c] =
          gaussian_row(r, rng, cfg.center_shift * severity[k][c]);

  const double w_shared = std::sqrt(cfg.coupling);
  const double w_priv = std::sqrt(1.0 - cfg.coupling);
  std::discrete_distribution<int> path_dist(cfg.class_prior.begin(),
                                            cfg.class_prior.end());

  Dataset ds;
  ds.raw_dim = r;
  ds.seed = cfg.seed;
  for (int c = 0; c < kNumCenters; ++c) {
    const auto center = static_cast<Center>(c);
    for (int i = 0; i < cfg.counts[c]; ++i) {
      SampleRecord rec;
      std::ostringstream id;
      id << lower(center_name(center)) << "-" << std::setw(4)
         << std::setfill('0') << i;
      rec.id = id.str();
      rec.center = center;
      rec.labels = label_from_pathology(
          static_cast<Pathology>(path_dist(rng)));

      RowVecX z = gaussian_row(r, rng, 1.0);
      RowVecX z_fl = gaussian_row(r, rng, 1.0);
      RowVecX z_t1c = gaussian_row(r, rng, 1.0);
      RowVecX u_fl = w_shared * z + w_priv * z_fl;
      RowVecX u_t1c = w_shared * z + w_priv * z_t1c;
      const int path = static_cast<int>(rec.labels.pathology);
      // Scan quality also varies per acquisition (motion, contrast timing),
      // so each record draws its own noise multiplier per sequence.
      const double q_fl = std::exp(0.5 * lognorm(rng));
      const double q_t1c = std::exp(0.5 * lognorm(rng));
      RowVecX fl = u_fl * class_view[0][path].transpose() +
                   class_mean[0][path] + center_offset[0][c] +
                   gaussian_row(r, rng, cfg.noise * severity[0][c] * q_fl);
      RowVecX t1c = u_t1c * class_view[1][path].transpose() +
                    class_mean[1][path] + center_offset[1][c] +
                    gaussian_row(r, rng, cfg.noise * severity[1][c] * q_t1c);

      // Both-missing draws are rejected so at least one sequence is kept;
      // the bounded retry guards against rates pinned at 1.
      bool drop_fl = false, drop_t1c = false;
      std::bernoulli_distribution bf(cfg.miss_fl[c]), bt(cfg.miss_t1c[c]);
      for (int attempt = 0; attempt < 64; ++attempt) {
        drop_fl = bf(rng);
        drop_t1c = bt(rng);
        if (!(drop_fl && drop_t1c)) break;
      }
      if (drop_fl && drop_t1c) {
        drop_fl = std::bernoulli_distribution(0.5)(rng);
        drop_t1c = !drop_fl;
      }
      if (!drop_fl) rec.fl_raw = std::move(fl);
      if (!drop_t1c) rec.t1c_raw = std::move(t1c);
      ds.records.push_back(std::move(rec));
    }
  }
  return ds;
}

const std::string& mode_name(Mode m) {
  static const std::string fs = "fs", ms = "ms";
  return m == Mode::FS ? fs : ms;
}

Mode mode_from_name(const std::string& name) {
  const std::string n = lower(name);
  if (n == "fs") return Mode::FS;
  if (n == "ms") return Mode::MS;
  throw std::runtime_error("unknown mode '" + name + "' (expected fs|ms)");
}

std::size_t SplitPlan::fs_pool_size() const {
  std::size_t n = 0;
  for (const auto& f : folds) n += f.size();
  return n;
}

std::size_t SplitPlan::ms_pool_size() const {
  return fs_pool_size() + incomplete_train.size();
}

std::vector<std::string> SplitPlan::train_ids(int fold, Mode mode) const {
  require(fold >= -1 && fold < static_cast<int>(folds.size()),
          "train_ids: fold out of range");
  std::vector<std::string> ids;
  for (int f = 0; f < static_cast<int>(folds.size()); ++f) {
    if (f == fold) continue;
    ids.insert(ids.end(), folds[f].begin(), folds[f].end());
  }
  if (mode == Mode::MS)
    ids.insert(ids.end(), incomplete_train.begin(), incomplete_train.end());
  return ids;
}

SplitPlan split_fig1e(const std::vector<SampleRecord>& records,
                      std::uint64_t seed, Center independent_center,
                      int n_folds, double test_frac) {
  require(n_folds >= 2, "split: need at least 2 folds");
  require(test_frac > 0.0 && test_frac < 1.0, "split: test_frac in (0,1)");
  SplitPlan plan;
  plan.independent_center = independent_center;
  plan.folds.assign(static_cast<std::size_t>(n_folds), {});
  Rng rng(mix_seed(seed, 0x511f));

  for (const auto& rec : records) {
    if (rec.center != independent_center) continue;
    if (rec.complete()) plan.independent_test.push_back(rec.id);
    // Incomplete records of the held-out center are excluded entirely.
  }

  for (int c = 0; c < kNumCenters; ++c) {
    const auto center = static_cast<Center>(c);
    if (center == independent_center) continue;
    std::vector<std::string> complete_ids;
    for (const auto& rec : records) {
      if (rec.center != center) continue;
      if (rec.complete())
        complete_ids.push_back(rec.id);
      else
        plan.incomplete_train.push_back(rec.id);
    }
    const auto n = static_cast<long long>(complete_ids.size());
    if (n == 0) continue;
    std::shuffle(complete_ids.begin(), complete_ids.end(), rng);
    if (n < 5) {
      plan.warnings.push_back("center " + center_name(center) + " has only " +
                              std::to_string(n) +
                              " complete samples; proportional assignment");
    }
    long long n_test = std::llround(test_frac * static_cast<double>(n));
    if (n >= 2) n_test = std::clamp(n_test, 1ll, n - 1);
    else n_test = 0;
    for (long long i = 0; i < n; ++i) {
      if (i < n_test) {
        plan.internal_test.push_back(complete_ids[static_cast<std::size_t>(i)]);
      } else {
        const auto f = static_cast<std::size_t>((i - n_test) % n_folds);
        plan.folds[f].push_back(complete_ids[static_cast<std::size_t>(i)]);
      }
    }
  }
  return plan;
}

void validate_split(const SplitPlan& plan,
                    const std::vector<SampleRecord>& records) {
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& rec : records) {
    auto [it, inserted] = by_id.emplace(rec.id, &rec);
    require_io(inserted, "split: duplicate record id '" + rec.id + "'");
  }
  std::set<std::string> seen;
  auto absorb = [&](const std::vector<std::string>& ids, const char* part,
                    bool must_be_complete) {
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      require_io(it != by_id.end(),
                 std::string("split: unknown id '") + id + "' in " + part);
      require_io(seen.insert(id).second,
                 std::string("split: id '") + id + "' assigned twice (" +
                     part + ")");
      if (must_be_complete)
        require_io(it->second->complete(),
                   std::string("split: incomplete record '") + id + "' in " +
                       part);
    }
  };
  for (std::size_t f = 0; f < plan.folds.size(); ++f)
    absorb(plan.folds[f], "fold", true);
  absorb(plan.internal_test, "internal test", true);
  absorb(plan.independent_test, "independent test", true);
  absorb(plan.incomplete_train, "incomplete surplus", false);
  for (const auto& id : plan.incomplete_train) {
    require_io(!by_id.at(id)->complete(),
               "split: complete record '" + id + "' in incomplete surplus");
  }
}

namespace {

nlohmann::json vec_to_json(const RowVecX& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

RowVecX vec_from_json(const nlohmann::json& arr) {
  RowVecX v(static_cast<Index>(arr.size()));
  Index i = 0;
  for (const auto& x : arr) v(i++) = x.get<double>();
  return v;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  require_io(out.good(), "cannot open '" + path + "' for writing");
  nlohmann::json header = {{"raw_dim", ds.raw_dim},
                           {"schema_version", ds.schema_version},
                           {"seed", ds.seed}};
  out << header.dump() << "\n";
  for (const auto& rec : ds.records) {
    nlohmann::json j = {
        {"id", rec.id},
        {"center", center_name(rec.center)},
        {"idh", static_cast<int>(rec.labels.idh)},
        {"codel", static_cast<int>(rec.labels.codel)},
        {"path", static_cast<int>(rec.labels.pathology)},
        {"mask_fl", rec.fl_raw.has_value()},
        {"mask_t1c", rec.t1c_raw.has_value()},
        {"fl", rec.fl_raw ? vec_to_json(*rec.fl_raw) : nlohmann::json()},
        {"t1c", rec.t1c_raw ? vec_to_json(*rec.t1c_raw) : nlohmann::json()},
    };
    out << j.dump() << "\n";
  }
  require_io(out.good(), "write failed for '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  require_io(in.good(), "cannot open '" + path + "'");
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " +
                             msg);
  };
  auto parse_line = [&](const std::string& text) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("parse error: ") + e.what());
      return nlohmann::json();  // unreachable
    }
  };

  ++line_no;
  require_io(static_cast<bool>(std::getline(in, line)),
             path + ": empty file (missing header line)");
  nlohmann::json header = parse_line(line);
  if (!header.is_object() || !header.contains("raw_dim") ||
      !header.contains("schema_version"))
    fail("header must be an object with raw_dim and schema_version");
  ds.raw_dim = header.at("raw_dim").get<Index>();
  ds.schema_version = header.at("schema_version").get<int>();
  ds.seed = header.value("seed", std::uint64_t{0});
  require_io(ds.raw_dim > 0, path + ": header raw_dim must be positive");

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = parse_line(line);
    if (!j.is_object()) fail("record line is not an object");
    SampleRecord rec;
    try {
      rec.id = j.at("id").get<std::string>();
      rec.center = center_from_name(j.at("center").get<std::string>());
      const int idh = j.at("idh").get<int>();
      const int codel = j.at("codel").get<int>();
      const int pt = j.at("path").get<int>();
      if (idh < 0 || idh > 1 || codel < 0 || codel > 1 || pt < 0 || pt > 2)
        fail("label out of range");
      rec.labels.idh = static_cast<Idh>(idh);
      rec.labels.codel = static_cast<Codel>(codel);
      rec.labels.pathology = static_cast<Pathology>(pt);
      const bool has_fl = j.at("mask_fl").get<bool>();
      const bool has_t1c = j.at("mask_t1c").get<bool>();
      if (has_fl != !j.at("fl").is_null() || has_t1c != !j.at("t1c").is_null())
        fail("mask bit inconsistent with null-ness of feature array");
      if (has_fl) rec.fl_raw = vec_from_json(j.at("fl"));
      if (has_t1c) rec.t1c_raw = vec_from_json(j.at("t1c"));
    } catch (const nlohmann::json::exception& e) {
      fail(std::string("bad record: ") + e.what());
    }
    if (!rec.fl_raw && !rec.t1c_raw) fail("record has no sequence present");
    if (rec.fl_raw && rec.fl_raw->size() != ds.raw_dim)
      fail("fl dimension " + std::to_string(rec.fl_raw->size()) +
           " != header raw_dim " + std::to_string(ds.raw_dim));
    if (rec.t1c_raw && rec.t1c_raw->size() != ds.raw_dim)
      fail("t1c dimension " + std::to_string(rec.t1c_raw->size()) +
           " != header raw_dim " + std::to_string(ds.raw_dim));
    if (!rec.labels.who_consistent())
      fail("labels violate WHO pathology/marker implications");
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace gmenet
