// Command-line front end: ren <command> [options]. Every command also takes
// --config FILE with `key = value` lines naming the same options; flags given
// on the command line win over the file.

#include "ren/config.hpp"
#include "ren/echo_state.hpp"
#include "ren/errors.hpp"
#include "ren/model.hpp"
#include "ren/observer.hpp"
#include "ren/param.hpp"
#include "ren/serialize.hpp"
#include "ren/train.hpp"
#include "ren/verify.hpp"
#include "ren/youla.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>

using namespace ren;
using nlohmann::json;

namespace {

class VerificationFailure : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const override { return ExitCode::kVerificationFailure; }
};

// Fills options that were not given on the command line from the config file.
void apply_config(CLI::App* sub, const std::string& path) {
  for (const auto& e : read_config(path)) {
    const std::string where = path + ":" + std::to_string(e.line) + ": ";
    if (e.key == "config") throw IoError(where + "'config' cannot be nested");
    CLI::Option* opt = sub->get_option_no_throw("--" + e.key);
    if (opt == nullptr) throw IoError(where + "unknown key '" + e.key + "' for '" + sub->get_name() + "'");
    if (opt->count() > 0) continue;
    try {
      opt->clear();
      opt->add_result(e.value);
      opt->run_callback();
    } catch (const CLI::Error& err) {
      throw IoError(where + "bad value for '" + e.key + "': " + err.what());
    }
  }
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw IoError(std::string("missing required option --") + flag);
}

std::optional<IqcSpec> make_iqc(const std::string& kind, double param, int p, int m) {
  if (kind.empty() || kind == "none") return std::nullopt;
  switch (iqc_kind_from_string(kind)) {
    case IqcKind::kLipschitz: return IqcSpec::lipschitz(param, p, m);
    case IqcKind::kInputPassive: return IqcSpec::input_passive(param, p);
    case IqcKind::kOutputPassive: return IqcSpec::output_passive(param, p);
    case IqcKind::kGeneral: break;
  }
  throw IoError("general IQCs are given through a model file, not flags");
}

verify::Report certificate_report(const ExplicitModel& m) {
  verify::Report r;
  const verify::LmiOptions lo{};
  r.checks = verify::check_contraction_lmi(m, {}, lo);
  if (m.iqc) {
    const auto more = verify::check_iqc_lmi(m, *m.iqc, {}, lo);
    r.checks.insert(r.checks.end(), more.begin(), more.end());
  }
  return r;
}

void emit(const json& j, const std::string& path) {
  std::cout << j.dump(2) << '\n';
  if (!path.empty()) write_json_file(path, j);
}

struct ModelOptions {
  std::string kind = "c-aren";
  int n = 4, m = 1, p = 1, q = 8;
  std::string activation = "relu";
  double epsilon = 1e-3;
  double alpha_bar = 1.0;
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::string iqc = "none";
  double iqc_param = 1.0;

  void add(CLI::App* c, bool io_dims) {
    c->add_option("--kind", kind, "c-ren, c-aren, r-ren or r-aren")->capture_default_str();
    c->add_option("--n", n, "state dimension")->capture_default_str();
    c->add_option("--q", q, "number of neurons")->capture_default_str();
    if (io_dims) {
      c->add_option("--m", m, "input dimension")->capture_default_str();
      c->add_option("--p", p, "output dimension")->capture_default_str();
    }
    c->add_option("--activation", activation, "relu, tanh or sigmoid")->capture_default_str();
    c->add_option("--epsilon", epsilon)->capture_default_str();
    c->add_option("--alpha-bar", alpha_bar, "contraction rate bound in (0, 1]")->capture_default_str();
    c->add_option("--scale", scale, "initialization scale")->capture_default_str();
    c->add_option("--seed", seed)->capture_default_str();
    c->add_option("--iqc", iqc, "none, lipschitz, input_passive or output_passive")->capture_default_str();
    c->add_option("--iqc-param", iqc_param, "gamma, nu or rho of the IQC")->capture_default_str();
  }

  DirectParams sample() const {
    std::mt19937_64 rng(seed);
    param::InitOptions io;
    io.scale = scale;
    io.epsilon = epsilon;
    io.alpha_bar = alpha_bar;
    io.activation = activation_from_string(activation);
    return param::sample_params(model_kind_from_string(kind), {n, m, p, q}, rng, io);
  }

  std::optional<IqcSpec> iqc_spec() const {
    const auto spec = make_iqc(iqc, iqc_param, p, m);
    if (is_robust(model_kind_from_string(kind)) && !spec)
      throw IoError("robust kind '" + kind + "' needs --iqc");
    if (!is_robust(model_kind_from_string(kind)) && spec)
      throw IoError("--iqc applies to robust kinds only (r-ren, r-aren)");
    return spec;
  }
};

struct TrainOptions {
  train::TrainConfig cfg;

  void add(CLI::App* c, bool chunked) {
    c->add_option("--epochs", cfg.epochs)->capture_default_str();
    c->add_option("--lr", cfg.learning_rate, "initial learning rate")->capture_default_str();
    c->add_option("--lr-decay", cfg.lr_decay, "learning rate factor per decay interval")->capture_default_str();
    c->add_option("--decay-every", cfg.decay_every, "epochs per decay (0 = none)")->capture_default_str();
    c->add_option("--batch", cfg.batch_size, "items per optimizer step")->capture_default_str();
    if (chunked) c->add_option("--chunk", cfg.chunk_length, "chunk length (0 = shortest sequence)")->capture_default_str();
    c->add_option("--beta1", cfg.beta1)->capture_default_str();
    c->add_option("--beta2", cfg.beta2)->capture_default_str();
    c->add_option("--eps-opt", cfg.eps_opt)->capture_default_str();
    c->add_flag("--check-every-step", cfg.check_every_step, "verify the certificate after each update");
  }
};

void write_log(const std::string& path, const std::vector<train::LogEntry>& log) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "epoch,step,loss,lr\n" << std::setprecision(17);
  for (const auto& e : log) out << e.epoch << ',' << e.step << ',' << e.loss << ',' << e.lr << '\n';
}

double batch_nrmse(const ExplicitModel& m, const SequenceBatch& data) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector x0 = data.initial_states.empty() ? Vector::Zero(m.dims.n) : data.initial_states[i];
    const Matrix y = simulate(m, data.inputs[i], x0).y;
    num += (y - data.outputs[i]).squaredNorm();
    den += data.outputs[i].squaredNorm();
  }
  return std::sqrt(num / den);
}

// ---------------------------------------------------------------- commands

struct Command {
  CLI::App* app = nullptr;
  std::string config;
  std::function<void()> run;
};

Command add_sample(CLI::App& root) {
  auto* c = root.add_subcommand("sample", "sample direct parameters and write a certified model");
  auto mo = std::make_shared<ModelOptions>();
  auto out = std::make_shared<std::string>();
  auto report = std::make_shared<std::string>();
  auto echo = std::make_shared<bool>(false);
  mo->add(c, true);
  c->add_option("--out", *out, "model JSON to write");
  c->add_option("--report", *report, "verification report JSON to write");
  c->add_flag("--echo", *echo, "zero the output map (echo-state dynamics only)");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(*out, "out");
    DirectParams t = mo->sample();
    if (*echo) {
      t.C2.setZero();
      t.D21.setZero();
      t.by.setZero();
    }
    const ExplicitModel m = param::construct(t, mo->iqc_spec());
    save_model(*out, m);
    const verify::Report r = certificate_report(m);
    emit(verify::report_to_json(r), *report);
    if (!r.pass()) throw VerificationFailure("sampled model failed verification");
  };
  return cmd;
}

Command add_convert(CLI::App& root) {
  auto* c = root.add_subcommand("convert", "rebuild an explicit model from direct parameters");
  auto in = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  auto iqc = std::make_shared<std::string>("none");
  auto iqc_param = std::make_shared<double>(1.0);
  c->add_option("--in", *in, "params JSON, or a model JSON carrying params");
  c->add_option("--out", *out, "model JSON to write");
  c->add_option("--iqc", *iqc, "IQC for robust kinds when the input has none")->capture_default_str();
  c->add_option("--iqc-param", *iqc_param)->capture_default_str();
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(*in, "in");
    require(*out, "out");
    const json j = read_json_file(*in);
    DirectParams t;
    std::optional<IqcSpec> spec;
    if (j.is_object() && j.contains("theta")) {
      t = params_from_json(j);
    } else {
      const ExplicitModel m = model_from_json(j);
      if (!m.params) throw IoError(*in + ": model carries no direct parameters");
      t = *m.params;
      spec = m.iqc;
    }
    if (!spec) spec = make_iqc(*iqc, *iqc_param, t.dims.p, t.dims.m);
    if (!t.robust()) spec.reset();
    const ExplicitModel m = param::construct(t, spec);
    save_model(*out, m);
    emit(verify::report_to_json(certificate_report(m)), "");
  };
  return cmd;
}

Command add_verify(CLI::App& root) {
  auto* c = root.add_subcommand("verify", "check a model's certificate and estimate its behaviour");
  struct Opts {
    std::string model, report;
    bool lipschitz = false, rate = false;
    double gamma = 0.0;
    verify::LipschitzOptions lo;
    int trials = 20, horizon = 100;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--model", o->model, "model JSON");
  c->add_option("--report", o->report, "report JSON to write");
  c->add_option("--gamma", o->gamma, "also check a Lipschitz bound gamma with the stored certificate");
  c->add_flag("--lipschitz", o->lipschitz, "estimate an empirical Lipschitz lower bound");
  c->add_flag("--rate", o->rate, "estimate the empirical contraction rate");
  c->add_option("--trials", o->trials, "trajectory pairs for --rate")->capture_default_str();
  c->add_option("--horizon", o->horizon, "steps per trajectory for --rate")->capture_default_str();
  c->add_option("--restarts", o->lo.restarts)->capture_default_str();
  c->add_option("--steps", o->lo.steps)->capture_default_str();
  c->add_option("--seed", o->lo.seed)->capture_default_str();
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->model, "model");
    const ExplicitModel m = load_model(o->model);
    verify::Report r = certificate_report(m);
    if (o->gamma > 0.0) {
      auto more = verify::check_iqc_lmi(m, IqcSpec::lipschitz(o->gamma, m.dims.p, m.dims.m));
      for (auto& x : more) x.name = "lipschitz_" + x.name;
      r.checks.insert(r.checks.end(), more.begin(), more.end());
    }
    if (o->lipschitz) r.gamma_lower = verify::estimate_lipschitz_lower(m, o->lo);
    if (o->rate) r.alpha_hat = verify::empirical_contraction_rate(m, o->trials, o->horizon, o->lo.seed);
    emit(verify::report_to_json(r), o->report);
    if (!r.pass()) {
      std::string failed;
      for (const auto& x : r.checks)
        if (!x.pass) failed += (failed.empty() ? "" : ", ") + x.name;
      throw VerificationFailure("verification failed: " + failed);
    }
  };
  return cmd;
}

Command add_simulate(CLI::App& root) {
  auto* c = root.add_subcommand("simulate", "run a model on input sequences");
  auto model = std::make_shared<std::string>();
  auto data = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  c->add_option("--model", *model, "model JSON");
  c->add_option("--data", *data, "input CSV (t,u1..um[,y...])");
  c->add_option("--out", *out, "output CSV (t,u1..um,y1..yp)");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(*model, "model");
    require(*data, "data");
    require(*out, "out");
    const ExplicitModel m = load_model(*model);
    SequenceBatch in = read_sequences_csv(*data);
    SequenceBatch res;
    res.inputs = in.inputs;
    for (const auto& u : in.inputs) {
      if (u.cols() != m.dims.m) throw IoError(*data + ": input width does not match the model");
      res.outputs.push_back(simulate(m, u).y);
    }
    write_sequences_csv(*out, res);
  };
  return cmd;
}

Command add_train(CLI::App& root) {
  auto* c = root.add_subcommand("train", "fit a model to sequence data by simulation error");
  struct Opts {
    ModelOptions mo;
    TrainOptions to;
    std::string data, out, log, checkpoint, resume;
  };
  auto o = std::make_shared<Opts>();
  o->mo.add(c, false);
  o->to.add(c, true);
  c->add_option("--data", o->data, "training CSV with inputs and outputs");
  c->add_option("--out", o->out, "trained model JSON");
  c->add_option("--log", o->log, "training log CSV (epoch,step,loss,lr)");
  c->add_option("--checkpoint", o->checkpoint, "checkpoint JSON written after every epoch");
  c->add_option("--resume", o->resume, "continue from a checkpoint");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->data, "data");
    require(o->out, "out");
    const SequenceBatch data = read_sequences_csv(o->data);
    if (!data.has_outputs()) throw IoError(o->data + ": no output columns");
    o->mo.m = data.input_dim();
    o->mo.p = data.output_dim();
    const auto spec = o->mo.iqc_spec();
    train::TrainConfig cfg = o->to.cfg;
    cfg.seed = o->mo.seed;
    const int length = cfg.chunk_length > 0 ? cfg.chunk_length : static_cast<int>(data.min_length());
    const train::ChunkSet chunks = train::make_chunks(data, length);
    train::FitState state;
    if (!o->resume.empty()) {
      state = train::state_from_json(read_json_file(o->resume));
      if (state.theta.dims != Dims{o->mo.n, o->mo.m, o->mo.p, o->mo.q} ||
          to_string(state.theta.kind) != o->mo.kind)
        throw IoError(o->resume + ": checkpoint does not match --kind/--n/--q and the data");
    } else {
      state.theta = o->mo.sample();
    }
    train::fit_objective(
        state, static_cast<int>(chunks.inputs.size()),
        [&](const ExplicitModel& mdl, const std::vector<int>& items, ModelGradient* g,
            std::vector<double>* losses) {
          return train::chunk_loss(mdl, chunks, items, g, losses, cfg.solver);
        },
        cfg, spec, [&](const train::FitState& s) {
          if (!o->checkpoint.empty()) write_json_file(o->checkpoint, train::state_to_json(s));
        });
    write_log(o->log, state.log);
    const ExplicitModel m = param::construct(state.theta, spec);
    save_model(o->out, m);
    json summary;
    summary["epochs"] = state.epoch;
    summary["final_loss"] = state.epoch_loss.empty() ? json(nullptr) : json(state.epoch_loss.back());
    summary["nrmse"] = batch_nrmse(m, data);
    summary["pass"] = verify::all_pass(certificate_report(m).checks);
    std::cout << summary.dump(2) << '\n';
  };
  return cmd;
}

Command add_lipschitz(CLI::App& root) {
  auto* c = root.add_subcommand("lipschitz", "bound the Lipschitz constant of a model");
  struct Opts {
    std::string model;
    verify::LipschitzOptions lo;
    bool upper = false;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--model", o->model, "model JSON");
  c->add_option("--horizon", o->lo.horizon)->capture_default_str();
  c->add_option("--restarts", o->lo.restarts)->capture_default_str();
  c->add_option("--steps", o->lo.steps)->capture_default_str();
  c->add_option("--lr", o->lo.learning_rate)->capture_default_str();
  c->add_option("--seed", o->lo.seed)->capture_default_str();
  c->add_flag("--upper", o->upper, "also bisect a certified upper bound");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->model, "model");
    const ExplicitModel m = load_model(o->model);
    json j;
    j["gamma_lower"] = verify::estimate_lipschitz_lower(m, o->lo);
    if (m.iqc && m.iqc->kind == IqcKind::kLipschitz) j["gamma_bar"] = m.iqc->parameter;
    if (o->upper) {
      const double up = verify::lipschitz_upper_bound(m);
      j["gamma_upper"] = std::isfinite(up) ? json(up) : json(nullptr);
    }
    std::cout << j.dump(2) << '\n';
  };
  return cmd;
}

Command add_fit_echo(CLI::App& root) {
  auto* c = root.add_subcommand("fit-echo", "sample echo-state dynamics and fit the readout");
  struct Opts {
    ModelOptions mo;
    std::string data, out;
    double ridge = 0.0;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--n", o->mo.n)->capture_default_str();
  c->add_option("--q", o->mo.q)->capture_default_str();
  c->add_option("--activation", o->mo.activation)->capture_default_str();
  c->add_option("--alpha-bar", o->mo.alpha_bar)->capture_default_str();
  c->add_option("--scale", o->mo.scale)->capture_default_str();
  c->add_option("--seed", o->mo.seed)->capture_default_str();
  c->add_option("--ridge", o->ridge, "ridge weight (0 = minimal-norm least squares)")->capture_default_str();
  c->add_option("--data", o->data, "training CSV with inputs and outputs");
  c->add_option("--out", o->out, "model JSON");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->data, "data");
    require(o->out, "out");
    const SequenceBatch data = read_sequences_csv(o->data);
    if (!data.has_outputs()) throw IoError(o->data + ": no output columns");
    echo_state::SampleOptions so;
    so.activation = activation_from_string(o->mo.activation);
    so.alpha_bar = o->mo.alpha_bar;
    const ExplicitModel dyn = echo_state::sample_contracting(
        {o->mo.n, data.input_dim(), data.output_dim(), o->mo.q}, o->mo.seed, o->mo.scale, so);
    const ExplicitModel m = echo_state::fit_readout(dyn, data, o->ridge);
    save_model(o->out, m);
    json j;
    j["nrmse"] = batch_nrmse(m, data);
    j["pass"] = verify::all_pass(certificate_report(m).checks);
    std::cout << j.dump(2) << '\n';
  };
  return cmd;
}

struct PdeOptions {
  observer::PdeConfig cfg;
  void add(CLI::App* c, bool with_steps) {
    c->add_option("--N", cfg.N, "grid nodes (odd)")->capture_default_str();
    c->add_option("--dt", cfg.dt, "time step (0 = dz^2/4)")->capture_default_str();
    if (with_steps) c->add_option("--steps", cfg.steps, "snapshots to generate")->capture_default_str();
    c->add_option("--noise", cfg.boundary_noise_std, "boundary random-walk std")->capture_default_str();
    c->add_option("--b0", cfg.b0, "initial boundary value")->capture_default_str();
    c->add_option("--pde-seed", cfg.seed, "seed of the boundary random walk")->capture_default_str();
  }
};

Command add_observer_train(CLI::App& root) {
  auto* c = root.add_subcommand("observer-train", "learn a contracting observer for the reaction-diffusion model");
  struct Opts {
    PdeOptions pde;
    observer::ObserverConfig oc;
    std::string out, log, activation = "relu";
  };
  auto o = std::make_shared<Opts>();
  o->oc.q = 40;
  o->oc.train.epochs = 60;
  o->oc.train.learning_rate = 1e-2;
  o->oc.train.batch_size = 200;
  o->oc.train.lr_decay = 0.1;
  o->oc.train.decay_every = 45;
  o->pde.add(c, true);
  TrainOptions to;
  c->add_option("--q", o->oc.q, "observer neurons")->capture_default_str();
  c->add_option("--scale", o->oc.init_scale)->capture_default_str();
  c->add_option("--activation", o->activation)->capture_default_str();
  c->add_option("--seed", o->oc.seed, "initialization and shuffle seed")->capture_default_str();
  c->add_option("--holdout", o->oc.holdout_fraction, "fraction of snapshots held out")->capture_default_str();
  c->add_option("--epochs", o->oc.train.epochs)->capture_default_str();
  c->add_option("--lr", o->oc.train.learning_rate)->capture_default_str();
  c->add_option("--lr-decay", o->oc.train.lr_decay)->capture_default_str();
  c->add_option("--decay-every", o->oc.train.decay_every)->capture_default_str();
  c->add_option("--batch", o->oc.train.batch_size)->capture_default_str();
  c->add_option("--out", o->out, "observer model JSON");
  c->add_option("--log", o->log, "training log CSV");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->out, "out");
    o->oc.activation = activation_from_string(o->activation);
    o->oc.train.seed = o->oc.seed;
    const observer::Snapshots snaps = observer::generate_snapshots(o->pde.cfg);
    const observer::TrainedObserver tr = observer::train_observer(snaps, o->oc);
    write_log(o->log, tr.state.log);
    json j = model_to_json(tr.model);
    j["observer"] = {{"rho_hat", tr.rho_hat}, {"N", o->pde.cfg.N}};
    write_json_file(o->out, j);
    json s;
    s["rho_hat"] = tr.rho_hat;
    s["final_loss"] = tr.state.epoch_loss.empty() ? json(nullptr) : json(tr.state.epoch_loss.back());
    s["pass"] = verify::all_pass(verify::check_contraction_lmi(tr.model));
    std::cout << s.dump(2) << '\n';
  };
  return cmd;
}

Command add_observer_eval(CLI::App& root) {
  auto* c = root.add_subcommand("observer-eval", "co-simulate plant, observer and a free-run copy");
  struct Opts {
    PdeOptions pde;
    std::string model, heatmap, report;
    int steps = 2000;
    double xi_true = 1.0, xi_hat = 0.0, rho = -1.0;
  };
  auto o = std::make_shared<Opts>();
  o->pde.cfg.seed = 1;
  o->pde.add(c, false);
  c->add_option("--model", o->model, "observer model JSON");
  c->add_option("--eval-steps", o->steps)->capture_default_str();
  c->add_option("--xi-true", o->xi_true, "uniform initial plant state")->capture_default_str();
  c->add_option("--xi-hat", o->xi_hat, "uniform initial observer state")->capture_default_str();
  c->add_option("--rho", o->rho, "correctness residual (default: value stored at training)");
  c->add_option("--heatmap", o->heatmap, "CSV t,z,xi,xi_hat");
  c->add_option("--report", o->report, "summary JSON to write");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->model, "model");
    const json j = read_json_file(o->model);
    ExplicitModel m;
    try {
      m = model_from_json(j);
    } catch (const IoError& e) {
      throw IoError(o->model + ": " + e.what());
    }
    double rho = o->rho;
    if (rho < 0.0) {
      if (!j.contains("observer") || !j["observer"].contains("rho_hat"))
        throw IoError(o->model + ": no stored rho_hat; pass --rho");
      rho = j["observer"]["rho_hat"].get<double>();
    }
    auto cfg = o->pde.cfg;
    cfg.N = m.dims.n;
    const observer::Evaluation ev = observer::evaluate_observer(
        m, cfg, Vector::Constant(cfg.N, o->xi_true), Vector::Constant(cfg.N, o->xi_hat), o->steps, rho);
    if (!o->heatmap.empty()) observer::write_heatmap_csv(o->heatmap, ev);
    json s;
    s["tail_error"] = ev.tail_error;
    s["tail_max_error"] = ev.tail_max_error;
    s["free_run_tail_error"] = ev.free_tail_error;
    s["rho_hat"] = ev.rho;
    s["alpha"] = ev.alpha;
    s["bound"] = std::isfinite(ev.bound) ? json(ev.bound) : json(nullptr);
    s["within_bound"] = ev.tail_max_error <= ev.bound;
    emit(s, o->report);
    if (!(ev.tail_max_error <= ev.bound))
      throw VerificationFailure("tail estimation error exceeds the error bound");
  };
  return cmd;
}

struct YoulaOptions {
  youla::YoulaConfig cfg;
  double c0 = std::nan("");
  std::string activation = "relu";
  void add(CLI::App* c) {
    c->add_option("--rho", cfg.rho)->capture_default_str();
    c->add_option("--phi", cfg.phi)->capture_default_str();
    c->add_option("--c0", c0, "constant term of the plant denominator (default phi^2)");
    c->add_option("--n", cfg.n, "Q states")->capture_default_str();
    c->add_option("--q", cfg.q, "Q neurons")->capture_default_str();
    c->add_option("--activation", activation)->capture_default_str();
    c->add_option("--lambda", cfg.lambda, "linear Q stability margin")->capture_default_str();
    c->add_option("--sequences", cfg.sequences)->capture_default_str();
    c->add_option("--length", cfg.length)->capture_default_str();
    c->add_option("--hold", cfg.hold)->capture_default_str();
    c->add_option("--magnitude", cfg.magnitude)->capture_default_str();
    c->add_option("--umax", cfg.policy.umax)->capture_default_str();
    c->add_option("--reg", cfg.policy.reg)->capture_default_str();
    c->add_option("--seed", cfg.seed)->capture_default_str();
  }
  void finish() {
    cfg.activation = activation_from_string(activation);
    if (!std::isnan(c0)) cfg.c0 = c0;
  }
};

json youla_config_json(const youla::YoulaConfig& c) {
  return {{"rho", c.rho},         {"phi", c.phi},       {"c0", c.c0 ? json(*c.c0) : json(nullptr)},
          {"n", c.n},             {"q", c.q},           {"activation", to_string(c.activation)},
          {"lambda", c.lambda},   {"hold", c.hold},     {"magnitude", c.magnitude},
          {"umax", c.policy.umax}, {"reg", c.policy.reg}, {"seed", c.seed},
          {"length", c.length},   {"sequences", c.sequences}};
}

youla::YoulaConfig youla_config_from_json(const json& j) {
  try {
    youla::YoulaConfig c;
    c.rho = j.at("rho").get<double>();
    c.phi = j.at("phi").get<double>();
    if (!j.at("c0").is_null()) c.c0 = j.at("c0").get<double>();
    c.n = j.at("n").get<int>();
    c.q = j.at("q").get<int>();
    c.activation = activation_from_string(j.at("activation").get<std::string>());
    c.lambda = j.at("lambda").get<double>();
    c.hold = j.at("hold").get<int>();
    c.magnitude = j.at("magnitude").get<double>();
    c.policy.umax = j.at("umax").get<double>();
    c.policy.reg = j.at("reg").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.length = j.at("length").get<int>();
    c.sequences = j.at("sequences").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw IoError(std::string("policy config: ") + e.what());
  }
}

json youla_summary(const youla::LinearPlant& plant, const youla::QBasis& nl, const youla::QBasis& lin,
                   const Vector& th_nl, const Vector& th_lin, const std::vector<Matrix>& ws,
                   double umax) {
  json s;
  for (const auto& [name, basis, th] :
       {std::tuple{std::string("nonlinear"), &nl, &th_nl}, std::tuple{std::string("linear"), &lin, &th_lin}}) {
    const ExplicitModel Q = basis->with_readout(*th);
    double cost = 0.0, umx = 0.0, gap = 0.0;
    for (std::size_t j = 0; j < ws.size(); ++j) {
      const auto cl = youla::closed_loop_rollout(plant, Q, ws[j]);
      cost += cl.zeta.cwiseAbs().sum();
      umx = std::max(umx, cl.u.cwiseAbs().maxCoeff());
      gap = std::max(gap, youla::pair_convergence_gap(plant, Q, ws[j], 7 + j));
    }
    s[name] = {{"l1_cost", cost},
               {"max_abs_u", umx},
               {"constraint_satisfied", umx <= umax + 1e-6},
               {"pair_gap", gap}};
  }
  return s;
}

Command add_youla_train(CLI::App& root) {
  auto* c = root.add_subcommand("youla-train", "optimize echo-state and linear Q policies");
  auto o = std::make_shared<YoulaOptions>();
  auto out = std::make_shared<std::string>();
  auto traces = std::make_shared<std::string>();
  o->add(c);
  c->add_option("--out", *out, "policy JSON (theta for both Q parameters)");
  c->add_option("--traces", *traces, "CSV traces on the first training sequence");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(*out, "out");
    o->finish();
    const youla::YoulaRun run = youla::run_experiment(o->cfg);
    json pol;
    pol["config"] = youla_config_json(o->cfg);
    pol["nonlinear_theta"] = vector_to_json(run.nonlinear_policy.theta);
    pol["linear_theta"] = vector_to_json(run.linear_policy.theta);
    write_json_file(*out, pol);
    json s = youla_summary(run.plant, run.nonlinear, run.linear, run.nonlinear_policy.theta,
                           run.linear_policy.theta, run.disturbances, o->cfg.policy.umax);
    s["open_loop_cost"] = run.open_loop_cost;
    std::cout << s.dump(2) << '\n';
    if (!traces->empty()) {
      const Matrix& w = run.disturbances.front();
      youla::write_traces_csv(*traces, w,
          {{"nonlinear", youla::closed_loop_rollout(run.plant, run.nonlinear.with_readout(run.nonlinear_policy.theta), w)},
           {"linear", youla::closed_loop_rollout(run.plant, run.linear.with_readout(run.linear_policy.theta), w)},
           {"open_loop", youla::linear_response(run.plant, w, Matrix::Zero(w.rows(), 1))}});
    }
    if (!s["nonlinear"]["constraint_satisfied"].get<bool>() || !s["linear"]["constraint_satisfied"].get<bool>())
      throw VerificationFailure("control bound violated on training data");
  };
  return cmd;
}

Command add_youla_eval(CLI::App& root) {
  auto* c = root.add_subcommand("youla-eval", "evaluate stored Q policies on fresh disturbances");
  struct Opts {
    std::string policy, traces;
    std::uint64_t seed = 1000;
    int sequences = 5, length = 500;
  };
  auto o = std::make_shared<Opts>();
  c->add_option("--policy", o->policy, "policy JSON from youla-train");
  c->add_option("--test-seed", o->seed)->capture_default_str();
  c->add_option("--sequences", o->sequences)->capture_default_str();
  c->add_option("--length", o->length)->capture_default_str();
  c->add_option("--traces", o->traces, "CSV traces on the first test sequence");
  Command cmd{c, {}, {}};
  cmd.run = [=] {
    require(o->policy, "policy");
    const json pol = read_json_file(o->policy);
    if (!pol.is_object() || !pol.contains("config")) throw IoError(o->policy + ": not a policy file");
    const youla::YoulaConfig cfg = youla_config_from_json(pol["config"]);
    const auto plant = youla::plant_from_tf(cfg.rho, cfg.phi, cfg.c0);
    const auto nl = youla::sample_q_echo(cfg.n, cfg.q, cfg.seed + 1, 1, cfg.activation);
    const auto lin = youla::sample_q_linear(cfg.n, cfg.lambda, cfg.seed + 2, 1);
    const Vector th_nl = vector_from_json(pol.at("nonlinear_theta"), nl.size(), "nonlinear_theta");
    const Vector th_lin = vector_from_json(pol.at("linear_theta"), lin.size(), "linear_theta");
    std::mt19937_64 rng(o->seed);
    std::vector<Matrix> ws;
    for (int j = 0; j < o->sequences; ++j)
      ws.push_back(youla::piecewise_constant(o->length, cfg.hold, cfg.magnitude, rng));
    json s = youla_summary(plant, nl, lin, th_nl, th_lin, ws, cfg.policy.umax);
    std::cout << s.dump(2) << '\n';
    if (!o->traces.empty()) {
      const Matrix& w = ws.front();
      youla::write_traces_csv(o->traces, w,
          {{"nonlinear", youla::closed_loop_rollout(plant, nl.with_readout(th_nl), w)},
           {"linear", youla::closed_loop_rollout(plant, lin.with_readout(th_lin), w)},
           {"open_loop", youla::linear_response(plant, w, Matrix::Zero(w.rows(), 1))}});
    }
  };
  return cmd;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent equilibrium networks: sampling, training, certification and applications"};
  app.require_subcommand(1);
  std::vector<Command> cmds = {add_sample(app),         add_convert(app),       add_verify(app),
                               add_simulate(app),       add_train(app),         add_lipschitz(app),
                               add_fit_echo(app),       add_observer_train(app), add_observer_eval(app),
                               add_youla_train(app),    add_youla_eval(app)};
  for (auto& c : cmds) c.app->add_option("--config", c.config, "key = value file with option defaults");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }
  try {
    for (auto& c : cmds) {
      if (!c.app->parsed()) continue;
      if (!c.config.empty()) apply_config(c.app, c.config);
      c.run();
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }
  return 0;
}
