#include <ostream>

#include "commands.hpp"
#include "matfun/errors.hpp"
#include "matfun/train.hpp"
#include "pipeline.hpp"
#include "run_record.hpp"

namespace matfun::cli {

namespace {

struct Run {
  MatrixFunction function;
  std::size_t n;
  std::string arch;
  codec::Scheme scheme = codec::Scheme::P1000;
};

struct Experiment {
  std::vector<Run> runs;
  std::size_t count = 0;  // training samples per run (10% of them held out during training)
  std::size_t test = 0;   // fresh samples scored for the report
  std::size_t epochs = 0;
};

Experiment define(const std::string& name, std::optional<std::size_t> n) {
  Experiment e;
  if (name == "smoke") {
    const std::size_t d = n.value_or(1);
    e.runs = {{MatrixFunction::exp, d, "mlp3"}, {MatrixFunction::exp, d, "encdec", codec::Scheme::P1000}};
    e.count = 2000;
    e.test = 200;
    e.epochs = 3;
  } else if (name == "baselines-desk") {
    const std::vector<std::size_t> dims = n ? std::vector<std::size_t>{*n} : std::vector<std::size_t>{1, 2, 3};
    for (std::size_t d : dims)
      for (MatrixFunction f : kAllFunctions)
        for (const char* arch : {"mlp3", "mlp7", "fourier-enc"}) e.runs.push_back({f, d, arch});
    e.count = 5000;
    e.test = 1000;
    e.epochs = 10;
  } else if (name == "encdec-desk") {
    const std::size_t d = n.value_or(3);
    for (codec::Scheme s : codec::kAllSchemes)
      for (MatrixFunction f : kAllFunctions) e.runs.push_back({f, d, "encdec", s});
    e.count = 10000;
    e.test = 1000;
    e.epochs = 10;
  } else {
    fail(ErrorKind::invalid_argument, "unknown experiment '" + name + "' (smoke, baselines-desk, encdec-desk)");
  }
  return e;
}

}  // namespace

void run_repro(const ReproOptions& o, std::ostream& out) {
  Experiment ex = define(o.experiment, o.n);
  if (o.count) ex.count = *o.count;
  if (o.epochs) ex.epochs = *o.epochs;
  require(ex.count >= 10 && ex.epochs >= 1, ErrorKind::invalid_argument, "repro needs --count >= 10 and --epochs >= 1");

  RunConfig rc;
  rc.subcommand = "repro";
  rc.seed = o.seed;
  rc.taus.assign(std::begin(metrics::kDefaultTaus), std::end(metrics::kDefaultTaus));
  rc.paths = {{"out", o.out.string()}};
  rc.options = {{"experiment", o.experiment}, {"count", ex.count}, {"test", ex.test}, {"epochs", ex.epochs}};
  if (o.n) rc.n = *o.n;
  rc.validate();

  std::vector<metrics::EvalErrors> results;
  std::vector<std::string> files;
  for (const Run& r : ex.runs) {
    const std::string fn(matfun::to_string(r.function));
    const std::string label = r.arch == "encdec" ? std::string(codec::to_string(r.scheme)) : r.arch;
    out << "[" << results.size() + 1 << "/" << ex.runs.size() << "] " << fn << " n=" << r.n << " " << label << "\n"
        << std::flush;

    const data::Dataset train = data::generate_dataset({r.function, r.n, ex.count, o.seed, 0, {}});
    const data::Dataset test = data::generate_dataset({r.function, r.n, ex.test, o.seed, ex.count, {}});
    const nn::Preset preset = nn::make_preset("desk", r.arch, r.n, r.scheme, o.seed);
    nn::TrainConfig tc;
    tc.epochs = ex.epochs;
    tc.batch = preset.batch;
    tc.schedule = preset.schedule;
    tc.seed = o.seed;
    tc.eval_limit = 200;

    auto model = nn::make_model(preset.model);
    nn::TrainHistory hist;
    if (auto* reg = dynamic_cast<nn::RegressionModel*>(model.get()))
      hist = nn::train_regression(*reg, train.samples, nn::regression_loss_for(r.function, r.n), tc);
    else
      hist = nn::train_seq2seq(dynamic_cast<nn::EncoderDecoder&>(*model), train.samples, tc);

    metrics::EvalErrors e = evaluate_model(*model, test.samples);
    e.arch_or_scheme = label;
    out << "  acc@0.05 " << shortest(e.accuracy(0.05)) << " malformed " << e.malformed << "\n" << std::flush;
    results.push_back(std::move(e));

    const std::string hist_file = "runs/" + fn + "-n" + std::to_string(r.n) + "-" + label + ".json";
    write_json(o.out / hist_file, {{"model", preset.model}, {"history", hist.to_json()}});
    files.push_back(hist_file);
  }
  write_text(o.out / "report.csv", metrics::to_table_csv(results, rc.taus));
  files.insert(files.begin(), "report.csv");
  write_manifest(o.out, rc, files);
  out << metrics::to_table_csv(results, rc.taus);
}

}  // namespace matfun::cli
