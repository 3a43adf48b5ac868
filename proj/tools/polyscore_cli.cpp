#include <csignal>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polyscore/polyscore.h"

namespace {

// 2 config, 3 protocol, 4 crypto, 5 accuracy regression.
int exit_code(ps_status s) {
  switch (s) {
    case PS_OK:
      return 0;
    case PS_ERR_PROTOCOL:
    case PS_ERR_PARAMETER_MISMATCH:
    case PS_ERR_KEY_CONFINEMENT:
      return 3;
    case PS_ERR_BUDGET_EXHAUSTED:
    case PS_ERR_OVERFLOW:
    case PS_ERR_NO_PARAMETER_SET:
      return 4;
    case PS_ERR_ACCURACY_REGRESSION:
      return 5;
    case PS_ERR_INTERNAL:
      return 1;
    default:
      return 2;
  }
}

struct Failure {
  ps_status status;
};

void check(ps_status s) {
  if (s != PS_OK) throw Failure{s};
}

struct String {
  char* p = nullptr;
  ~String() { ps_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

struct Model {
  ps_model* p = nullptr;
  ~Model() { ps_model_free(p); }
};

struct Client {
  ps_client* p = nullptr;
  ~Client() { ps_client_free(p); }
};

struct Result {
  ps_result* p = nullptr;
  ~Result() { ps_result_free(p); }
};

struct Server {
  ps_server* p = nullptr;
  ~Server() { ps_server_free(p); }
};

ps_server* active_server = nullptr;

void on_signal(int) { ps_server_stop(active_server); }

std::vector<int> parse_bits(const std::string& list) {
  std::vector<int> out;
  std::stringstream in(list);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError("--bits", "expected a comma-separated list of integers");
    }
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) {
    std::fprintf(stderr, "error: cannot write %s\n", path.c_str());
    throw Failure{PS_ERR_IO};
  }
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Encrypted acoustic scoring with polynomial networks", "polyscore"};
  app.require_subcommand(1);
  std::int64_t seed = -1;
  app.add_option("--seed", seed, "Seed for every random choice (entropy when omitted)");

  // keygen
  auto* keygen = app.add_subcommand("keygen", "Generate public, secret and evaluation key files");
  std::string params = "mid4096", key_prefix = "polyscore";
  keygen->add_option("--params", params, "Parameter set")->capture_default_str();
  keygen->add_option("--out", key_prefix, "Writes <out>.pk, <out>.sk and <out>.ek")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train a float network on the synthetic frame task");
  std::string model_out, hidden = "32,32,32", activation = "relu";
  int epochs = 20;
  double lr = 0.02;
  std::uint64_t task_seed = 1;
  train->add_option("--out", model_out, "Model manifest to write")->required();
  train->add_option("--hidden", hidden, "Hidden layer widths")->capture_default_str();
  train->add_option("--activation", activation, "relu or sigmoid")->capture_default_str();
  train->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", lr, "Learning rate")->capture_default_str();
  train->add_option("--task-seed", task_seed, "Seed of the synthetic task")->capture_default_str();

  // convert
  auto* convert = app.add_subcommand("convert", "Convert to a polynomial network and fine-tune it");
  std::string model_in;
  int finetune = 20;
  double convert_lr = 0.003;
  convert->add_option("--model", model_in, "Input model manifest")->required();
  convert->add_option("--out", model_out, "Converted model manifest")->required();
  convert->add_option("--finetune-epochs", finetune, "Float fine-tuning epochs")->capture_default_str();
  convert->add_option("--lr", convert_lr, "Fine-tuning learning rate")->capture_default_str();
  convert->add_option("--task-seed", task_seed, "Seed of the synthetic task")->capture_default_str();

  // quantize
  auto* quantize = app.add_subcommand("quantize", "Fit codebooks and retrain with quantized tensors");
  int bits = 8, retrain = 10;
  std::string report;
  quantize->add_option("--model", model_in, "Input model manifest")->required();
  quantize->add_option("--out", model_out, "Quantized model manifest")->required();
  quantize->add_option("--bits", bits, "Codebook width: 2, 4, 8 or 16")->capture_default_str();
  quantize->add_option("--retrain-epochs", retrain, "Quantized retraining epochs (0 = quantize only)")
      ->capture_default_str();
  quantize->add_option("--lr", convert_lr, "Learning rate")->capture_default_str();
  quantize->add_option("--report", report, "Per-epoch CSV (epoch,phase,loss,acc)");
  quantize->add_option("--task-seed", task_seed, "Seed of the synthetic task")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "Score encrypted frames for remote clients");
  std::string listen = "127.0.0.1:7700", serve_params, pk, sk, ek, log;
  std::size_t threads = 1, max_connections = 0;
  serve->add_option("--model", model_in, "HE-compatible model manifest")->required();
  serve->add_option("--listen", listen, "host:port (port 0 picks one)")->capture_default_str();
  serve->add_option("--params", serve_params, "Accepted parameter sets (default: every set that fits)");
  serve->add_option("--pk", pk, "Accept only this public key");
  serve->add_option("--ek", ek, "Evaluation key belonging to --pk");
  serve->add_option("--threads", threads, "Scoring threads")->capture_default_str();
  serve->add_option("--max-connections", max_connections, "Exit after this many connections (0 = never)")
      ->capture_default_str();
  serve->add_option("--log", log, "Per-batch CSV log");

  // infer
  auto* infer = app.add_subcommand("infer", "Encrypt features, score them and decode the result");
  std::string features, connect, graph, posteriors_out;
  bool local = false, softmax = false;
  std::size_t batch = 0;
  infer->add_option("--features", features, "Feature file")->required();
  auto* connect_opt = infer->add_option("--connect", connect, "Server endpoint host:port");
  auto* local_opt = infer->add_flag("--local", local, "Score in-process with --model");
  connect_opt->excludes(local_opt);
  infer->add_option("--model", model_in, "Model for --local");
  infer->add_option("--params", params, "Parameter set, optionally name/sim")->capture_default_str();
  infer->add_option("--pk", pk, "Existing public key");
  infer->add_option("--sk", sk, "Existing secret key");
  infer->add_option("--ek", ek, "Existing evaluation key");
  infer->add_option("--batch", batch, "Frames per message (default 16)");
  infer->add_flag("--softmax", softmax, "Turn scores into probabilities");
  infer->add_option("--graph", graph, "Decoding graph");
  infer->add_option("--out", posteriors_out, "Posterior file to write");
  infer->add_option("--report", report, "Latency CSV to write");
  infer->add_option("--threads", threads, "Scoring threads for --local")->capture_default_str();

  // decode
  auto* decode = app.add_subcommand("decode", "Viterbi-decode a posterior file");
  std::string posteriors_in;
  decode->add_option("--posteriors", posteriors_in, "Posterior file")->required();
  decode->add_option("--graph", graph, "Decoding graph (default: uniform)");

  // bench
  auto* bench = app.add_subcommand("bench", "Accuracy grid over codebook widths on the synthetic task");
  std::string bits_list = "16,8,4,2";
  bool assert_trend = false;
  bench->add_option("--bits", bits_list, "Comma-separated widths")->capture_default_str();
  bench->add_flag("--assert", assert_trend, "Exit 5 if quantize-only accuracy rises as widths shrink");
  bench->add_option("--report", report, "Grid CSV to write");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Compare the simulated and real HE backends");
  std::size_t sequences = 200;
  std::string selftest_params = "toy2048";
  selftest->add_option("--params", selftest_params, "Parameter set")->capture_default_str();
  selftest->add_option("--sequences", sequences, "Random operation sequences")->capture_default_str();

  // features
  auto* feats = app.add_subcommand("features", "Export held-out synthetic frames as a feature file");
  std::size_t frames = 50, offset = 0;
  feats->add_option("--out", features, "Feature file to write")->required();
  feats->add_option("--frames", frames, "Frame count")->capture_default_str();
  feats->add_option("--offset", offset, "First held-out frame")->capture_default_str();
  feats->add_option("--task-seed", task_seed, "Seed of the synthetic task")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::uint64_t useed = seed < 0 ? 1 : static_cast<std::uint64_t>(seed);
  try {
    if (*keygen) {
      check(ps_keygen(params.c_str(), seed, (key_prefix + ".pk").c_str(), (key_prefix + ".sk").c_str(),
                      (key_prefix + ".ek").c_str()));
      std::printf("wrote %s.pk %s.sk %s.ek (%s)\n", key_prefix.c_str(), key_prefix.c_str(), key_prefix.c_str(),
                  params.c_str());
    } else if (*train) {
      std::vector<std::size_t> widths;
      for (int w : parse_bits(hidden)) {
        if (w <= 0) throw CLI::ValidationError("--hidden", "widths must be positive");
        widths.push_back(static_cast<std::size_t>(w));
      }
      ps_train_options o;
      ps_train_options_init(&o);
      o.hidden = widths.data();
      o.hidden_count = widths.size();
      o.activation = activation.c_str();
      o.epochs = epochs;
      o.learning_rate = lr;
      o.seed = useed;
      o.task_seed = task_seed;
      Model m;
      double acc = 0;
      check(ps_train(&o, &m.p, &acc));
      check(ps_model_save(m.p, model_out.c_str()));
      std::printf("held-out accuracy %.4f\n", acc);
    } else if (*convert) {
      Model in, out;
      double acc = 0;
      check(ps_model_load(model_in.c_str(), &in.p));
      check(ps_convert(in.p, finetune, convert_lr, useed, task_seed, &out.p, &acc));
      check(ps_model_save(out.p, model_out.c_str()));
      String plan;
      if (ps_model_plan_parameters(out.p, &plan.p) == PS_OK)
        std::printf("held-out accuracy %.4f, parameter set %s\n", acc, plan.str().c_str());
      else
        std::printf("held-out accuracy %.4f, no built-in parameter set fits: %s\n", acc, ps_last_error());
    } else if (*quantize) {
      Model in, out;
      ps_quantize_options o;
      ps_quantize_options_init(&o);
      o.bits = bits;
      o.retrain_epochs = retrain;
      o.learning_rate = convert_lr;
      o.seed = useed;
      o.task_seed = task_seed;
      o.report_path = opt(report);
      double q = 0, r = 0;
      check(ps_model_load(model_in.c_str(), &in.p));
      check(ps_quantize(in.p, &o, &out.p, &q, &r));
      check(ps_model_save(out.p, model_out.c_str()));
      std::printf("%d-bit held-out accuracy: quantize-only %.4f, retrained %.4f\n", bits, q, r);
    } else if (*serve) {
      Model m;
      check(ps_model_load(model_in.c_str(), &m.p));
      ps_server_options o;
      ps_server_options_init(&o);
      o.listen = listen.c_str();
      o.params = opt(serve_params);
      o.pk_path = opt(pk);
      o.ek_path = opt(ek);
      o.threads = threads;
      o.max_connections = max_connections;
      o.log_path = opt(log);
      Server s;
      check(ps_server_create(m.p, &o, &s.p));
      active_server = s.p;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::printf("listening on port %u\n", static_cast<unsigned>(ps_server_port(s.p)));
      std::fflush(stdout);
      check(ps_server_run(s.p));
      active_server = nullptr;
    } else if (*infer) {
      if (!local && connect.empty()) throw CLI::ValidationError("infer", "give --connect or --local");
      if (local && model_in.empty()) throw CLI::ValidationError("infer", "--local needs --model");
      ps_client_options o;
      ps_client_options_init(&o);
      o.params = params.c_str();
      o.seed = seed;
      o.batch_size = batch;
      o.softmax = softmax ? 1 : 0;
      o.pk_path = opt(pk);
      o.sk_path = opt(sk);
      o.ek_path = opt(ek);
      Client c;
      Model m;
      if (local) {
        check(ps_model_load(model_in.c_str(), &m.p));
        check(ps_client_local(m.p, &o, threads, &c.p));
      } else {
        check(ps_client_connect(connect.c_str(), &o, &c.p));
      }
      Result r;
      check(ps_client_infer_file(c.p, features.c_str(), opt(graph), &r.p));
      check(ps_client_close(c.p));
      if (!posteriors_out.empty()) check(ps_result_save_posteriors(r.p, posteriors_out.c_str()));
      String csv, table;
      check(ps_client_latency_csv(c.p, &csv.p));
      check(ps_client_latency_table(c.p, &table.p));
      if (!report.empty()) write_text(report, csv.str());
      std::size_t flagged = 0;
      for (std::size_t i = 0; i < ps_result_frames(r.p); ++i) flagged += ps_result_flagged(r.p, i) ? 1 : 0;
      std::printf("%s\n", ps_result_transcript(r.p));
      std::fprintf(stderr, "%zu frames, %zu flagged\n%s", ps_result_frames(r.p), flagged, table.str().c_str());
    } else if (*decode) {
      String t;
      check(ps_decode_file(posteriors_in.c_str(), opt(graph), &t.p));
      std::printf("%s\n", t.str().c_str());
    } else if (*bench) {
      const auto widths = parse_bits(bits_list);
      String grid;
      const ps_status s = ps_bench(widths.data(), widths.size(), useed, assert_trend ? 1 : 0, &grid.p);
      if (grid.p) {
        std::printf("%s", grid.str().c_str());
        if (!report.empty()) write_text(report, grid.str());
      }
      check(s);
    } else if (*selftest) {
      String r;
      const ps_status s = ps_selftest(selftest_params.c_str(), sequences, useed, &r.p);
      if (r.p) std::printf("%s\n", r.str().c_str());
      check(s);
    } else if (*feats) {
      check(ps_export_toy_features(features.c_str(), frames, offset, task_seed));
      std::printf("wrote %zu frames to %s\n", frames, features.c_str());
    }
  } catch (const CLI::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Failure& f) {
    const char* msg = ps_last_error();
    std::fprintf(stderr, "error (%s): %s\n", ps_status_name(f.status), *msg ? msg : "failed");
    return exit_code(f.status);
  }
  return 0;
}
