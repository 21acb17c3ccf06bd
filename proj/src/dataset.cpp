#include "rolnn/dataset.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>

static_assert(std::endian::native == std::endian::little,
              "dataset IO assumes a little-endian host");

namespace rolnn::fomsim {

namespace {

Vec sample_initial_augmented(const AugmentedPendulum& plant, const DatasetSpec& spec,
                             CounterRng& rng, Vec* qad_out) {
  const int np = plant.n_pend();
  const int n = plant.n();
  Vec qa(n), qad(n);
  for (int i = 0; i < np; ++i) qa[i] = rng.uniform(-spec.pend_q0, spec.pend_q0);
  for (int i = 0; i < np; ++i) qad[i] = rng.uniform(-spec.pend_qd0, spec.pend_qd0);
  for (int i = np; i < n; ++i) qa[i] = rng.uniform(-spec.mesh_q0, spec.mesh_q0);
  for (int i = np; i < n; ++i) qad[i] = rng.uniform(-spec.mesh_qd0, spec.mesh_qd0);
  *qad_out = qad;
  return qa;
}

Vec pd_plus(const Plant& plant, const FullState& x, const ReferencePoint& ref,
            const Vec& kp, const Vec& kd) {
  const Vec e = x.q - ref.q_d;
  const Vec ed = x.qd - ref.qd_d;
  return plant.mass(x.q) * ref.qdd_d +
         (plant.coriolis(x.q, x.qd) + plant.damping(x.q)) * ref.qd_d +
         plant.gravity(x.q) - kp.cwiseProduct(e) - kd.cwiseProduct(ed);
}

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
void write_mat(std::ofstream& f, const Mat& m) {
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(m.rows()));
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(m.cols()));
  f.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * m.size());
}
Mat read_mat(std::ifstream& f) {
  auto r = read_pod<std::uint32_t>(f);
  auto c = read_pod<std::uint32_t>(f);
  Mat m(r, c);
  f.read(reinterpret_cast<char*>(m.data()),
         static_cast<std::streamsize>(sizeof(double)) * m.size());
  return m;
}

constexpr char kMagic[8] = {'R', 'L', 'N', 'N', 'D', 'A', 'T', 'A'};

}  // namespace

nlohmann::json dataset_spec_to_json(const DatasetSpec& s) {
  return {{"n_unforced", s.n_unforced},
          {"n_regulation", s.n_regulation},
          {"n_tracking", s.n_tracking},
          {"duration", s.duration},
          {"dt", s.dt},
          {"seed", s.seed},
          {"pend_q0", s.pend_q0},
          {"pend_qd0", s.pend_qd0},
          {"mesh_q0", s.mesh_q0},
          {"mesh_qd0", s.mesh_qd0},
          {"pend_amp_deg", {s.pend_amp_min_deg, s.pend_amp_max_deg}},
          {"pend_freq_hz", {s.pend_freq_min, s.pend_freq_max}},
          {"mesh_amp", s.mesh_amp},
          {"mesh_freq_hz", {s.mesh_freq_min, s.mesh_freq_max}},
          {"kp_pend", s.kp_pend},
          {"kd_pend", s.kd_pend},
          {"kp_mesh", s.kp_mesh},
          {"kd_mesh", s.kd_mesh}};
}

Dataset generate_dataset(const AugmentedPendulum& plant, const DatasetSpec& spec) {
  if (spec.dt <= 0 || spec.duration <= 0)
    throw ConfigError("generate_dataset: dt and duration must be positive");
  if (spec.pend_amp_min_deg <= 0 || spec.pend_amp_max_deg < spec.pend_amp_min_deg)
    throw ConfigError("generate_dataset: invalid pendulum amplitude range");
  const int n = plant.n();
  const int np = plant.n_pend();
  const int nm = plant.n_mesh();
  const int m = plant.m();
  const int steps = static_cast<int>(std::llround(spec.duration / spec.dt));
  const bool under = m < n;

  Vec kp(n), kd(n);
  for (int i = 0; i < np; ++i) {
    kp[i] = spec.kp_pend[static_cast<std::size_t>(i)];
    kd[i] = spec.kd_pend[static_cast<std::size_t>(i)];
  }
  for (int i = np; i < n; ++i) {
    kp[i] = spec.kp_mesh;
    kd[i] = spec.kd_mesh;
  }

  CounterRng root(spec.seed);
  Dataset ds;
  ds.n = n;
  ds.m = m;
  ds.dt = spec.dt;

  const int total = spec.n_unforced + spec.n_regulation + spec.n_tracking;
  for (int traj_id = 0; traj_id < total; ++traj_id) {
    CounterRng rng = root.stream(static_cast<std::uint64_t>(traj_id));
    Vec qad0;
    Vec qa0 = sample_initial_augmented(plant, spec, rng, &qad0);
    FullState x0{plant.diffeo().forward(qa0),
                 plant.diffeo().jacobian_mat(qa0) * qad0};

    std::unique_ptr<ReferenceGenerator> ref;
    const bool unforced = traj_id < spec.n_unforced;
    if (traj_id >= spec.n_unforced && traj_id < spec.n_unforced + spec.n_regulation) {
      Vec dummy;
      Vec qa_t = sample_initial_augmented(plant, spec, rng, &dummy);
      ref = std::make_unique<RegulationReference>(plant, qa_t);
    } else if (!unforced) {
      std::vector<SineSpec> sines(static_cast<std::size_t>(n));
      for (int i = 0; i < np; ++i) {
        SineSpec s;
        s.amplitude = rng.uniform(spec.pend_amp_min_deg, spec.pend_amp_max_deg) *
                      M_PI / 180.0;
        s.freq_hz = rng.uniform(spec.pend_freq_min, spec.pend_freq_max);
        // Phase chosen so the reference starts at the sampled initial angle;
        // the ratio is clamped for initial angles beyond the amplitude.
        s.phase = std::asin(std::clamp(qa0[i] / s.amplitude, -1.0, 1.0));
        sines[static_cast<std::size_t>(i)] = s;
      }
      for (int i = 0; i < nm; ++i) {
        SineSpec s;
        s.amplitude = rng.uniform(-spec.mesh_amp, spec.mesh_amp);
        s.freq_hz = rng.uniform(spec.mesh_freq_min, spec.mesh_freq_max);
        double ratio = std::abs(s.amplitude) < 1e-12
                           ? 0.0
                           : std::clamp(qa0[np + i] / s.amplitude, -1.0, 1.0);
        s.phase = std::asin(ratio);
        sines[static_cast<std::size_t>(np + i)] = s;
      }
      ref = std::make_unique<SineReference>(plant, std::move(sines));
    }

    Trajectory tr;
    tr.t = Vec(steps);
    tr.q = Mat(steps, n);
    tr.qd = Mat(steps, n);
    tr.tau = Mat(steps, n);
    tr.u = Mat(steps, m);

    FullState x = x0;
    for (int k = 0; k < steps; ++k) {
      const double t = k * spec.dt;
      Vec u = Vec::Zero(m);
      Vec tau = Vec::Zero(n);
      if (!unforced) {
        ReferencePoint rp = ref->at(t);
        Vec tau_des = pd_plus(plant, x, rp, kp, kd);
        if (under) {
          // Least-squares realizable part of the desired generalized force.
          const Mat b = plant.actuation(x.q);
          u = (b.transpose() * b).llt().solve(b.transpose() * tau_des);
          tau = b * u;
        } else {
          u = tau_des;
          tau = tau_des;
        }
      }
      tr.t[k] = t;
      tr.q.row(k) = x.q.transpose();
      tr.qd.row(k) = x.qd.transpose();
      tr.tau.row(k) = tau.transpose();
      tr.u.row(k) = u.transpose();
      x = step_rk4(plant, x, u, spec.dt);
      if (!all_finite(x.q) || !all_finite(x.qd))
        throw NumericError("dataset generation blew up in trajectory " +
                           std::to_string(traj_id) + " at step " + std::to_string(k));
    }
    ds.trajectories.push_back(std::move(tr));
  }

  ds.metadata = {{"spec", dataset_spec_to_json(spec)},
                 {"plant",
                  {{"n", n},
                   {"m", m},
                   {"link_lengths", plant.params().arm.lengths},
                   {"link_masses", plant.params().arm.masses},
                   {"gravity", plant.params().arm.gravity},
                   {"mesh_mass", plant.params().mesh_mass},
                   {"mesh_stiffness", plant.params().mesh_stiffness},
                   {"damping_pend", plant.params().damping_pend},
                   {"damping_mesh", plant.params().damping_mesh},
                   {"diffeo_eps", plant.params().diffeo_eps},
                   {"diffeo_seed", plant.params().diffeo_seed},
                   {"underactuated", plant.params().underactuated}}}};
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset for writing: " + path);
  f.write(kMagic, 8);
  write_pod<std::uint32_t>(f, 1u);
  write_pod<std::int32_t>(f, ds.n);
  write_pod<std::int32_t>(f, ds.m);
  write_pod<double>(f, ds.dt);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(ds.trajectories.size()));
  for (const auto& tr : ds.trajectories) {
    write_mat(f, Mat(tr.t));
    write_mat(f, tr.q);
    write_mat(f, tr.qd);
    write_mat(f, tr.tau);
    write_mat(f, tr.u);
  }
  if (!f) throw IoError("dataset write failed: " + path);
  std::ofstream js(path + ".json");
  if (!js) throw IoError("cannot open dataset header for writing: " + path + ".json");
  js << ds.metadata.dump(2) << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open dataset: " + path);
  char magic[8];
  f.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) throw IoError("bad dataset magic: " + path);
  auto version = read_pod<std::uint32_t>(f);
  if (version != 1u) throw IoError("unsupported dataset version");
  Dataset ds;
  ds.n = read_pod<std::int32_t>(f);
  ds.m = read_pod<std::int32_t>(f);
  ds.dt = read_pod<double>(f);
  auto ntraj = read_pod<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < ntraj; ++i) {
    Trajectory tr;
    tr.t = Vec(read_mat(f).col(0));
    tr.q = read_mat(f);
    tr.qd = read_mat(f);
    tr.tau = read_mat(f);
    tr.u = read_mat(f);
    ds.trajectories.push_back(std::move(tr));
  }
  if (!f) throw IoError("truncated dataset: " + path);
  std::ifstream js(path + ".json");
  if (js) ds.metadata = nlohmann::json::parse(js, nullptr, true, true);
  return ds;
}

void export_dataset_csv(const std::string& prefix, const Dataset& ds) {
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s_traj_%03zu.csv", prefix.c_str(), i);
    std::ofstream f(name);
    if (!f) throw IoError(std::string("cannot open CSV for writing: ") + name);
    f << "t";
    for (int j = 1; j <= ds.n; ++j) f << ",q_" << j;
    for (int j = 1; j <= ds.n; ++j) f << ",qd_" << j;
    for (int j = 1; j <= ds.n; ++j) f << ",tau_" << j;
    f << "\n";
    const auto& tr = ds.trajectories[i];
    f << std::setprecision(17);
    for (int k = 0; k < tr.t.size(); ++k) {
      f << tr.t[k];
      for (int j = 0; j < ds.n; ++j) f << "," << tr.q(k, j);
      for (int j = 0; j < ds.n; ++j) f << "," << tr.qd(k, j);
      for (int j = 0; j < ds.n; ++j) f << "," << tr.tau(k, j);
      f << "\n";
    }
  }
}

}  // namespace rolnn::fomsim
