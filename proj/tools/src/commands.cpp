#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "matfun/certify.hpp"
#include "matfun/codec.hpp"
#include "matfun/datagen.hpp"
#include "matfun/errors.hpp"
#include "matfun/metrics.hpp"
#include "matfun/models.hpp"
#include "matfun/relu_construct.hpp"
#include "matfun/train.hpp"
#include "pipeline.hpp"
#include "run_record.hpp"

namespace matfun::cli {

namespace {

MatrixFunction function_or_fail(const std::string& name) {
  const auto f = parse_function(name);
  require(f.has_value(), ErrorKind::invalid_argument, "unknown function '" + name + "' (exp, log, sign, sin, cos)");
  return *f;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<std::size_t> all_indices(std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  return idx;
}

}  // namespace

std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

void run_gen(const GenOptions& o, std::ostream& out) {
  RunConfig rc;
  rc.subcommand = "gen";
  rc.function = o.function;
  rc.n = o.n;
  rc.seed = o.seed;
  rc.paths = {{"out", o.out.string()}};
  rc.options = {{"count", o.count}, {"law", o.law}, {"sigma", o.sigma}, {"clip", o.clip}, {"first_index", o.first_index}};
  rc.validate();
  require(o.count > 0, ErrorKind::invalid_argument, "--count must be positive");

  data::DatasetRequest req{function_or_fail(o.function), o.n, o.count, o.seed, o.first_index,
                           {data::parse_law(o.law), o.sigma, o.clip}};
  const data::Dataset ds = data::generate_dataset(req);
  data::write_dataset(o.out / "data.jsonl", ds);
  write_manifest(o.out, rc, {"data.jsonl"}, {{"dataset", ds.manifest.to_json()}});
  out << "wrote " << ds.samples.size() << " samples, " << ds.manifest.rejections.total() << " rejected draws\n";
}

void run_train(const TrainOptions& o, std::ostream& out) {
  RunConfig rc;
  rc.subcommand = "train";
  rc.arch = o.arch;
  rc.preset = o.preset;
  rc.scheme = o.scheme;
  rc.seed = o.seed;
  rc.paths = {{"out", o.out.string()}};
  if (o.data) rc.paths["data"] = o.data->string();

  data::Dataset ds;
  if (o.data) {
    ds = data::read_dataset(*o.data);
    require(!o.function || *o.function == matfun::to_string(ds.manifest.function), ErrorKind::invalid_argument,
            "--fn disagrees with the dataset manifest");
    require(!o.n || *o.n == ds.manifest.n, ErrorKind::invalid_argument, "--n disagrees with the dataset manifest");
  }
  const std::string fn = o.data ? std::string(matfun::to_string(ds.manifest.function)) : o.function.value_or("");
  const std::size_t n = o.data ? ds.manifest.n : o.n.value_or(0);
  require(!fn.empty() && n > 0, ErrorKind::invalid_argument, "train needs --data, or --fn and --n");
  rc.function = fn;
  rc.n = n;
  rc.validate();

  const codec::Scheme scheme = codec::parse_scheme(o.scheme);
  const nn::Preset preset = nn::make_preset(o.preset, o.arch, n, scheme, o.seed);
  if (!o.data) {
    const std::size_t count = o.count.value_or(preset.samples);
    ds = data::generate_dataset({function_or_fail(fn), n, count, o.seed, 0, {}});
  }

  nn::TrainConfig tc;
  tc.epochs = o.epochs.value_or(preset.epochs);
  tc.batch = o.batch.value_or(preset.batch);
  tc.schedule = {o.lr.value_or(preset.schedule.peak), o.warmup.value_or(preset.schedule.warmup)};
  tc.max_steps = o.max_steps.value_or(0);
  tc.seed = o.seed;
  tc.on_epoch = [&](const nn::EpochRecord& r) {
    out << "epoch " << r.epoch << " steps " << r.steps << " loss " << shortest(r.train_loss);
    if (!r.heldout_accuracy.empty()) out << " acc@" << shortest(tc.taus[0]) << " " << shortest(r.heldout_accuracy[0]);
    out << "\n" << std::flush;
  };

  auto model = nn::make_model(preset.model);
  nn::TrainHistory hist;
  std::string loss_name;
  if (auto* reg = dynamic_cast<nn::RegressionModel*>(model.get())) {
    require(!o.data || o.count.value_or(ds.samples.size()) == ds.samples.size(), ErrorKind::invalid_argument,
            "--count cannot be combined with --data");
    const nn::LossKind loss = o.loss ? nn::parse_loss(*o.loss) : nn::regression_loss_for(function_or_fail(fn), n);
    loss_name = nn::to_string(loss);
    hist = nn::train_regression(*reg, ds.samples, loss, tc);
  } else {
    auto& ed = dynamic_cast<nn::EncoderDecoder&>(*model);
    loss_name = nn::to_string(nn::LossKind::cross_entropy);
    hist = nn::train_seq2seq(ed, ds.samples, tc);
  }

  rc.options = {{"epochs", tc.epochs},       {"batch", tc.batch},          {"lr", tc.schedule.peak},
                {"warmup", tc.schedule.warmup}, {"max_steps", tc.max_steps}, {"samples", ds.samples.size()},
                {"loss", loss_name},           {"model", preset.model}};
  const nlohmann::json extra{{"function", fn}, {"n", n}, {"loss", loss_name}, {"preset", o.preset}};
  std::filesystem::create_directories(o.out);
  nn::save_checkpoint(o.out / "model.ckpt", *model, extra);
  write_json(o.out / "history.json", hist.to_json());
  write_manifest(o.out, rc, {"model.ckpt", "history.json"}, {{"dataset", ds.manifest.to_json()}});
  out << "trained " << model->arch() << " (" << model->params().scalar_count() << " parameters)\n";
}

metrics::EvalErrors evaluate_model(nn::Model& model, std::span<const data::Sample> samples) {
  const auto idx = all_indices(samples.size());
  if (auto* reg = dynamic_cast<nn::RegressionModel*>(&model)) {
    require(reg->n() == samples.front().input.n(), ErrorKind::dimension_mismatch,
            "model was trained for n = " + std::to_string(reg->n()));
    return nn::evaluate_regression(*reg, samples, idx);
  }
  return nn::evaluate_seq2seq(dynamic_cast<nn::EncoderDecoder&>(model), samples, idx).errors;
}

void run_eval(const EvalOptions& o, std::ostream& out) {
  RunConfig rc;
  rc.subcommand = "eval";
  rc.taus = o.taus;
  rc.paths = {{"model", o.model.string()}, {"data", o.data.string()}, {"out", o.out.string()}};
  rc.validate();
  require(!o.taus.empty(), ErrorKind::invalid_argument, "--taus must list at least one tolerance");

  nn::Checkpoint ck = nn::load_checkpoint(o.model);
  const data::Dataset ds = data::read_dataset(o.data);
  require(!ds.samples.empty(), ErrorKind::invalid_argument, o.data.string() + " holds no samples");
  rc.function = std::string(matfun::to_string(ds.manifest.function));
  rc.n = ds.manifest.n;
  rc.arch = ck.model->arch();

  const metrics::EvalErrors e = evaluate_model(*ck.model, ds.samples);
  const std::vector<metrics::EvalErrors> all{e};
  const auto rows = metrics::report(all, o.taus);
  metrics::write_csv(o.out / "metrics.csv", rows);
  write_manifest(o.out, rc, {"metrics.csv"}, {{"model_sha256", sha256_file(o.model)}, {"data_sha256", sha256_file(o.data)}});
  out << metrics::to_csv(rows);
}

void run_build_relu(const BuildReluOptions& o, std::ostream& out) {
  RunConfig rc;
  rc.subcommand = "build-relu";
  rc.n = o.n;
  rc.paths = {{"out", o.out.string()}};
  rc.options = {{"M", o.M}, {"eps", o.eps}, {"samples", o.samples}, {"budget", o.budget}};
  rc.validate();

  const auto t0 = std::chrono::steady_clock::now();
  const relu::ExpNetSpec spec = relu::ExpNetSpec::make(o.n, o.M, o.eps);
  const std::size_t budget = o.budget ? o.budget : relu::kDefaultWeightBudget;
  const relu::ReluNetwork net = relu::build_exp_net(spec, budget);
  relu::CertReport report = relu::certify(net, relu::CertOracle::exp, {spec.M, o.samples});
  relu::attach_spec(report, spec);

  std::filesystem::create_directories(o.out);
  relu::write_network(o.out / "network.bin", net, {{"spec", relu::spec_to_json(spec)}, {"oracle", "exp"}});
  write_json(o.out / "spec.json", relu::spec_to_json(spec));
  write_json(o.out / "report.json", report.to_json());
  write_manifest(o.out, rc, {"network.bin", "spec.json", "report.json"});
  out << "K " << spec.K << " depth " << report.depth << " width " << report.width << " weights " << report.weight_count
      << " max_error " << shortest(report.max_error) << " over " << report.points << " points (" << std::fixed
      << std::setprecision(1) << seconds_since(t0) << " s)\n";
  require(report.within(spec.epsilon), ErrorKind::certification_failed,
          "sampled error " + shortest(report.max_error) + " exceeds epsilon " + shortest(spec.epsilon));
}

void run_certify(const CertifyOptions& o, std::ostream& out) {
  RunConfig rc;
  rc.subcommand = "certify";
  rc.paths = {{"net", o.net.string()}, {"out", o.out.string()}};

  const relu::LoadedNetwork loaded = relu::read_network(o.net);
  std::optional<relu::ExpNetSpec> spec;
  if (loaded.metadata.contains("spec")) spec = relu::spec_from_json(loaded.metadata.at("spec"));
  const double M = o.M.value_or(spec ? spec->M : 1.0);
  rc.options = {{"oracle", o.oracle}, {"M", M}, {"points", o.points}};
  rc.validate();

  relu::CertReport report = relu::certify(loaded.net, relu::parse_cert_oracle(o.oracle), {M, o.points});
  if (spec && o.oracle == "exp") relu::attach_spec(report, *spec);
  std::filesystem::create_directories(o.out);
  write_json(o.out / "report.json", report.to_json());
  write_manifest(o.out, rc, {"report.json"}, {{"net_sha256", sha256_file(o.net)}});
  out << "max_error " << shortest(report.max_error) << " over " << report.points << " points";
  if (spec) out << " (epsilon " << shortest(spec->epsilon) << ")";
  out << "\n";
  if (spec && o.oracle == "exp" && M <= spec->M)
    require(report.within(spec->epsilon), ErrorKind::certification_failed,
            "sampled error " + shortest(report.max_error) + " exceeds epsilon " + shortest(spec->epsilon));
}

void run_codec(const CodecOptions& o, std::ostream& out) {
  const codec::Scheme s = codec::parse_scheme(o.scheme);
  auto join = [](const std::vector<std::string>& v) {
    std::string r;
    for (const auto& t : v) r += (r.empty() ? "" : " ") + t;
    return r;
  };
  if (o.action == "encode" || o.action == "roundtrip") {
    require(o.value.has_value(), ErrorKind::invalid_argument, "codec " + o.action + " needs --value");
    const auto ids = codec::encode_value(*o.value, s);
    out << "tokens: " << join(codec::to_strings(ids, s)) << "\n";
    if (o.action == "roundtrip") out << "decoded: " << shortest(codec::decode_value(ids, s)) << "\n";
  } else if (o.action == "decode") {
    require(!o.tokens.empty(), ErrorKind::invalid_argument, "codec decode needs --tokens");
    const auto ids = codec::from_strings(o.tokens, s);
    out << "decoded: " << shortest(codec::decode_value(ids, s)) << "\n";
  } else if (o.action == "vocab") {
    const codec::Vocabulary& v = codec::vocab(s);
    const codec::SchemeInfo& si = codec::info(s);
    out << "scheme " << codec::to_string(s) << " core " << v.core_size() << " total " << v.size() << " tokens/coefficient "
        << si.tokens_per_coeff << " exponents [" << si.exponent_min << ", " << si.exponent_max << "]\n";
    if (o.out) {
      RunConfig rc;
      rc.subcommand = "codec";
      rc.scheme = o.scheme;
      rc.paths = {{"out", o.out->string()}};
      rc.options = {{"action", "vocab"}};
      std::filesystem::create_directories(*o.out);
      codec::write_vocab_file(*o.out / "vocab.txt", s);
      write_manifest(*o.out, rc, {"vocab.txt"});
    }
  } else {
    fail(ErrorKind::invalid_argument, "unknown codec action '" + o.action + "' (roundtrip, encode, decode, vocab)");
  }
}

}  // namespace matfun::cli
