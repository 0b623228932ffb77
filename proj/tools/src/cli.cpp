#include "cli.hpp"

#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "matfun/errors.hpp"

namespace matfun::cli {

namespace {

void error_line(std::ostream& err, std::string_view kind, const std::string& message) {
  err << "error: " << nlohmann::json{{"kind", kind}, {"message", message}}.dump() << "\n";
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Matrix functions: data, models, ReLU constructions and number codecs", "matfun"};
  app.require_subcommand(1);
  app.set_version_flag("--version", MATFUN_VERSION);

  const std::vector<std::string> functions{"exp", "log", "sign", "sin", "cos"};
  const std::vector<std::string> schemes{"P10", "P1000", "B1999", "FP15"};

  GenOptions gen;
  auto* g = app.add_subcommand("gen", "Sample matrices and write oracle targets");
  g->add_option("--fn", gen.function, "Matrix function")->required()->check(CLI::IsMember(functions));
  g->add_option("--n", gen.n, "Matrix dimension")->required()->check(CLI::Range(1, 10));
  g->add_option("--count", gen.count, "Number of samples")->required()->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "Master seed");
  g->add_option("--law", gen.law, "Entry distribution")->check(CLI::IsMember({"gaussian", "uniform"}));
  g->add_option("--sigma", gen.sigma, "Gaussian scale");
  g->add_option("--clip", gen.clip, "Entries are clipped to [-clip, clip]");
  g->add_option("--first-index", gen.first_index, "Index of the first sample");
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model and write a checkpoint");
  t->add_option("--arch", tr.arch, "Architecture")->required()->check(CLI::IsMember({"mlp3", "mlp7", "fourier-enc", "encdec"}));
  t->add_option("--fn", tr.function, "Matrix function (with --count)")->check(CLI::IsMember(functions));
  t->add_option("--n", tr.n, "Matrix dimension (with --count)")->check(CLI::Range(1, 10));
  t->add_option("--scheme", tr.scheme, "Token scheme for encdec")->check(CLI::IsMember(schemes));
  t->add_option("--preset", tr.preset, "Hyperparameter preset")->check(CLI::IsMember({"desk", "paper"}));
  t->add_option("--seed", tr.seed, "Seed for data, init, split, shuffling and dropout");
  auto* data_opt = t->add_option("--data", tr.data, "Dataset written by gen")->check(CLI::ExistingFile);
  t->add_option("--count", tr.count, "Generate this many samples instead of reading --data")->excludes(data_opt);
  t->add_option("--epochs", tr.epochs, "Override the preset epoch count");
  t->add_option("--batch", tr.batch, "Override the preset batch size");
  t->add_option("--lr", tr.lr, "Override the preset peak learning rate");
  t->add_option("--warmup", tr.warmup, "Override the preset warmup steps");
  t->add_option("--max-steps", tr.max_steps, "Stop after this many optimizer steps");
  t->add_option("--loss", tr.loss, "Regression loss")->check(CLI::IsMember({"rel_l1", "frobenius", "mse"}));
  t->add_option("--out", tr.out, "Output directory")->required();

  EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Score a checkpoint on a dataset");
  e->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  e->add_option("--data", ev.data, "Dataset written by gen")->required()->check(CLI::ExistingFile);
  e->add_option("--taus", ev.taus, "Tolerances")->delimiter(',');
  e->add_option("--out", ev.out, "Output directory")->required();

  BuildReluOptions br;
  auto* b = app.add_subcommand("build-relu", "Build and certify a ReLU network for the matrix exponential");
  b->add_option("--n", br.n, "Matrix dimension")->check(CLI::Range(1, 10));
  b->add_option("--M", br.M, "Entry bound")->check(CLI::PositiveNumber);
  b->add_option("--eps", br.eps, "Target accuracy")->check(CLI::PositiveNumber);
  b->add_option("--samples", br.samples, "Certification points")->check(CLI::PositiveNumber);
  b->add_option("--budget", br.budget, "Weight budget");
  b->add_option("--out", br.out, "Output directory")->required();

  CertifyOptions ce;
  auto* c = app.add_subcommand("certify", "Measure a stored ReLU network against an oracle");
  c->add_option("--net", ce.net, "Network file")->required()->check(CLI::ExistingFile);
  c->add_option("--oracle", ce.oracle, "Reference function")->check(CLI::IsMember({"exp", "identity"}));
  c->add_option("--M", ce.M, "Entry bound, defaults to the network's")->check(CLI::PositiveNumber);
  c->add_option("--points", ce.points, "Grid or sample points")->check(CLI::PositiveNumber);
  c->add_option("--out", ce.out, "Output directory")->required();

  CodecOptions co;
  auto* k = app.add_subcommand("codec", "Number tokenization utilities");
  k->add_option("action", co.action, "roundtrip, encode, decode or vocab")
      ->required()
      ->check(CLI::IsMember({"roundtrip", "encode", "decode", "vocab"}));
  k->add_option("--scheme", co.scheme, "Token scheme")->required()->check(CLI::IsMember(schemes));
  k->add_option("--value", co.value, "Number to encode");
  k->add_option("--tokens", co.tokens, "Tokens to decode");
  k->add_option("--out", co.out, "Directory for vocab.txt");

  ReproOptions rp;
  auto* r = app.add_subcommand("repro", "Run a named desk-scale experiment end to end");
  r->add_option("--experiment", rp.experiment, "Experiment")
      ->required()
      ->check(CLI::IsMember({"smoke", "baselines-desk", "encdec-desk"}));
  r->add_option("--seed", rp.seed, "Master seed");
  r->add_option("--n", rp.n, "Matrix dimension override")->check(CLI::Range(1, 10));
  r->add_option("--count", rp.count, "Training samples per run");
  r->add_option("--epochs", rp.epochs, "Epochs per run");
  r->add_option("--out", rp.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) run_gen(gen, out);
    else if (*t) run_train(tr, out);
    else if (*e) run_eval(ev, out);
    else if (*b) run_build_relu(br, out);
    else if (*c) run_certify(ce, out);
    else if (*k) run_codec(co, out);
    else if (*r) run_repro(rp, out);
  } catch (const Error& ex) {
    error_line(err, to_string(ex.kind()), ex.what());
    return 1;
  } catch (const std::exception& ex) {
    error_line(err, "internal", ex.what());
    return 1;
  }
  return 0;
}

}  // namespace matfun::cli
