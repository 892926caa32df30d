#include "pmns/pmns.h"

#include <cstring>
#include <exception>
#include <memory>
#include <string>

#include "pmns/initdata.hpp"
#include "pmns/lattice.hpp"
#include "pmns/run.hpp"

struct pmns_run {
  pmns::Json raw;
  pmns::RunOverrides ov;
  std::string dir;
};

struct pmns_field {
  std::unique_ptr<pmns::RandomField> field;
};

namespace {

thread_local std::string g_error;

template <class F>
int guarded(F&& f) {
  try {
    g_error.clear();
    f();
    return PMNS_OK;
  } catch (const pmns::ValidationError& e) {
    g_error = e.what();
    return PMNS_EINVAL;
  } catch (const std::exception& e) {
    g_error = e.what();
    return PMNS_ERUNTIME;
  } catch (...) {
    g_error = "unknown error";
    return PMNS_ERUNTIME;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw pmns::ValidationError(std::string(what) + " is null");
}

}  // namespace

extern "C" {

const char* pmns_version(void) { return PMNS_VERSION; }

const char* pmns_last_error(void) { return g_error.c_str(); }

int pmns_run_open(const char* config_path, pmns_run** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = nullptr;
    auto r = std::make_unique<pmns_run>();
    r->raw = config_path ? pmns::load_config(config_path) : pmns::Json::object();
    *out = r.release();
  });
}

int pmns_run_open_json(const char* config_json, pmns_run** out) {
  return guarded([&] {
    need(out, "output handle");
    need(config_json, "config text");
    *out = nullptr;
    auto r = std::make_unique<pmns_run>();
    r->raw = pmns::parse_config(config_json);
    *out = r.release();
  });
}

int pmns_run_set_seed(pmns_run* run, uint64_t seed) {
  return guarded([&] {
    need(run, "run");
    run->ov.seed = seed;
  });
}

int pmns_run_set_threads(pmns_run* run, int threads) {
  return guarded([&] {
    need(run, "run");
    if (threads < 1) throw pmns::ValidationError("threads must be at least 1");
    run->ov.threads = threads;
  });
}

int pmns_run_set_ladder(pmns_run* run, const double* ks, size_t count) {
  return guarded([&] {
    need(run, "run");
    if (count > 0) need(ks, "ladder");
    run->ov.ladder = std::vector<double>(ks, ks + count);
  });
}

int pmns_run_set_out_dir(pmns_run* run, const char* dir) {
  return guarded([&] {
    need(run, "run");
    need(dir, "out dir");
    run->ov.out_dir = dir;
  });
}

int pmns_run_execute(pmns_run* run, const char* subcommand) {
  return guarded([&] {
    need(run, "run");
    need(subcommand, "subcommand");
    const auto cfg = pmns::resolve_config(run->raw, run->ov, subcommand);
    run->dir = pmns::execute(cfg, subcommand).dir.string();
  });
}

const char* pmns_run_directory(const pmns_run* run) { return run ? run->dir.c_str() : ""; }

void pmns_run_close(pmns_run* run) { delete run; }

int pmns_report(const char* const* run_dirs, size_t count, const char* out_root, char* buf,
                size_t buf_len) {
  return guarded([&] {
    if (count > 0) need(run_dirs, "run directories");
    std::vector<std::filesystem::path> dirs;
    for (size_t i = 0; i < count; ++i) {
      need(run_dirs[i], "run directory");
      dirs.emplace_back(run_dirs[i]);
    }
    const auto res = pmns::report(dirs, out_root ? out_root : pmns::default_out_dir());
    const std::string d = res.dir.string();
    if (buf && buf_len > d.size()) std::memcpy(buf, d.c_str(), d.size() + 1);
  });
}

int pmns_field_create(int64_t K, double kappa, uint64_t seed, const char* rv, const char* phases,
                      pmns_field** out) {
  return guarded([&] {
    need(out, "output handle");
    *out = nullptr;
    pmns::RandomFieldSpec s;
    s.K = K;
    s.kappa = kappa;
    s.seed = seed;
    if (rv) s.rv = pmns::rv_kind_from_string(rv);
    s.phases = pmns::phase_kind_from_string(phases ? phases : "random");
    auto P = std::make_shared<const pmns::Partition>(pmns::Partition::build(K, kappa));
    auto f = std::make_unique<pmns_field>();
    f->field = std::make_unique<pmns::RandomField>(P, s);
    *out = f.release();
  });
}

int64_t pmns_field_subblock_count(const pmns_field* f) {
  return f ? f->field->partition().subblock_count() : -1;
}

int pmns_field_value(const pmns_field* f, const double xi[3], double out[6]) {
  return guarded([&] {
    need(f, "field");
    need(xi, "xi");
    need(out, "output");
    const auto v = f->field->value_at({xi[0], xi[1], xi[2]});
    for (int j = 0; j < 3; ++j) {
      out[2 * j] = v[static_cast<std::size_t>(j)].real();
      out[2 * j + 1] = v[static_cast<std::size_t>(j)].imag();
    }
  });
}

void pmns_field_destroy(pmns_field* f) { delete f; }

}  // extern "C"
