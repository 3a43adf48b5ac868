#include "polyscore/polyscore.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "common/error.hpp"
#include "decoder/decoder.hpp"
#include "hecrypt/params.hpp"
#include "hecrypt/selftest.hpp"
#include "hecrypt/serialize.hpp"
#include "io/features.hpp"
#include "io/files.hpp"
#include "io/model_io.hpp"
#include "io/posteriors.hpp"
#include "protocol/client.hpp"
#include "protocol/session.hpp"
#include "protocol/transport.hpp"
#include "trainer/bench.hpp"
#include "trainer/trainer.hpp"

using namespace polyscore;

struct ps_model {
  io::ModelBundle bundle;
};

struct ps_server {
  std::unique_ptr<std::ofstream> log;
  std::unique_ptr<proto::Server> server;
  std::unique_ptr<proto::TcpListener> listener;
  std::size_t max_connections = 0;
};

struct ps_client {
  std::unique_ptr<proto::Server> local_server;
  std::unique_ptr<proto::Channel> channel;
  std::unique_ptr<proto::ClientSession> session;
  std::unique_ptr<proto::Client> client;
  proto::LatencyReport report;
  std::size_t utterances = 0;
};

struct ps_result {
  std::size_t frames = 0;
  std::size_t dims = 0;
  bool probabilities = false;
  std::vector<double> scores;
  std::vector<std::size_t> indices;
  std::vector<int> flagged;
  std::string transcript;
  double latency[5] = {0, 0, 0, 0, 0};
};

namespace {

thread_local std::string last_error;

ps_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return PS_ERR_INVALID_ARGUMENT;
    case ErrorCode::ShapeMismatch: return PS_ERR_SHAPE_MISMATCH;
    case ErrorCode::NonFinite: return PS_ERR_NON_FINITE;
    case ErrorCode::Unsupported: return PS_ERR_UNSUPPORTED;
    case ErrorCode::Overflow: return PS_ERR_OVERFLOW;
    case ErrorCode::Geometry: return PS_ERR_GEOMETRY;
    case ErrorCode::ParameterMismatch: return PS_ERR_PARAMETER_MISMATCH;
    case ErrorCode::BudgetExhausted: return PS_ERR_BUDGET_EXHAUSTED;
    case ErrorCode::NoParameterSet: return PS_ERR_NO_PARAMETER_SET;
    case ErrorCode::Protocol: return PS_ERR_PROTOCOL;
    case ErrorCode::Io: return PS_ERR_IO;
    case ErrorCode::Config: return PS_ERR_CONFIG;
    case ErrorCode::Divergence: return PS_ERR_DIVERGENCE;
    case ErrorCode::KeyConfinement: return PS_ERR_KEY_CONFINEMENT;
  }
  return PS_ERR_INTERNAL;
}

ps_status fail(ps_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <typename F>
ps_status guarded(F&& body) {
  try {
    last_error.clear();
    return body();
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(PS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(PS_ERR_INTERNAL, e.what());
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " must not be null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

// "mid4096" or "mid4096/sim"
he::HeParams params_by_name(const std::string& name) {
  const auto slash = name.find('/');
  const auto& base = he::parameter_set(name.substr(0, slash));
  if (slash == std::string::npos) return base;
  const auto backend = he::backend_from_string(name.substr(slash + 1));
  return backend == he::Backend::Sim ? he::simulated(base) : base;
}

std::optional<std::uint64_t> seed_of(std::int64_t seed) {
  if (seed < 0) return std::nullopt;
  return static_cast<std::uint64_t>(seed);
}

const PolyNetwork& he_network(const ps_model* model) {
  need(model, "model");
  const auto& net = model->bundle.net;
  require(net.he_compatible(), ErrorCode::Unsupported,
          "model is not HE-compatible; run convert before serving it");
  return net;
}

ps_model* new_model(io::ModelBundle bundle) { return new ps_model{std::move(bundle)}; }

std::unique_ptr<proto::ClientSession> make_session(const ps_client_options* options) {
  need(options, "options");
  need(options->params, "options.params");
  proto::ClientConfig cfg;
  cfg.params = params_by_name(options->params);
  if (options->batch_size > 0) cfg.batch_size = options->batch_size;
  cfg.softmax = options->softmax != 0;
  cfg.seed = seed_of(options->seed);
  const int given = (options->pk_path != nullptr) + (options->sk_path != nullptr) + (options->ek_path != nullptr);
  require(given == 0 || given == 3, ErrorCode::Config, "client keys need all of pk, sk and ek");
  if (given == 3) {
    he::SessionKeys keys{he::deserialize_public_key(io::read_file(options->pk_path)),
                         he::deserialize_secret_key(io::read_file(options->sk_path)),
                         he::deserialize_eval_key(io::read_file(options->ek_path))};
    require(keys.pk.context->params() == cfg.params, ErrorCode::ParameterMismatch,
            "key files were generated for '" + keys.pk.context->params().name + "', not '" + cfg.params.name + "'");
    cfg.keys = std::move(keys);
  }
  return std::make_unique<proto::ClientSession>(std::move(cfg));
}

ps_status finish_client(std::unique_ptr<ps_client> c, ps_client** out) {
  c->client = std::make_unique<proto::Client>(*c->session, *c->channel);
  c->client->handshake();
  *out = c.release();
  return PS_OK;
}

ps_result* make_result(const proto::UtteranceResult& r, std::size_t dims, bool probabilities) {
  auto res = std::make_unique<ps_result>();
  res->frames = r.frames.size();
  res->dims = dims;
  res->probabilities = probabilities;
  for (const auto& f : r.frames) {
    res->indices.push_back(f.frame.frame_index);
    res->flagged.push_back(f.flagged ? 1 : 0);
    res->scores.insert(res->scores.end(), f.frame.scores.begin(), f.frame.scores.end());
  }
  res->transcript = r.transcript;
  const auto& l = r.latency;
  const double values[5] = {l.encryption_ms, l.am_scoring_ms, l.decryption_ms, l.decoding_ms, l.overall_ms};
  std::copy(values, values + 5, res->latency);
  return res.release();
}

ps_status run_utterance(ps_client* client, const std::vector<std::vector<double>>& frames, const char* graph_path,
                        ps_result** out) {
  need(client, "client");
  need(out, "out");
  std::optional<DecodeGraph> graph;
  if (graph_path) graph = load_graph(graph_path);
  const auto r = client->client->run_utterance(frames, graph ? &*graph : nullptr);
  client->report.add({proto::to_hex(client->session->id()), client->utterances++, frames.size(), r.latency});
  const std::size_t dims = client->session->server_info().output_dim;
  *out = make_result(r, dims, client->session->softmax_enabled());
  return PS_OK;
}

}  // namespace

extern "C" {

const char* ps_version(void) { return "0.1.0"; }

const char* ps_status_name(ps_status status) {
  switch (status) {
    case PS_OK: return "ok";
    case PS_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case PS_ERR_SHAPE_MISMATCH: return "shape-mismatch";
    case PS_ERR_NON_FINITE: return "non-finite";
    case PS_ERR_UNSUPPORTED: return "unsupported";
    case PS_ERR_OVERFLOW: return "overflow";
    case PS_ERR_GEOMETRY: return "geometry";
    case PS_ERR_PARAMETER_MISMATCH: return "parameter-mismatch";
    case PS_ERR_BUDGET_EXHAUSTED: return "budget-exhausted";
    case PS_ERR_NO_PARAMETER_SET: return "no-parameter-set";
    case PS_ERR_PROTOCOL: return "protocol";
    case PS_ERR_IO: return "io";
    case PS_ERR_CONFIG: return "config";
    case PS_ERR_DIVERGENCE: return "divergence";
    case PS_ERR_KEY_CONFINEMENT: return "key-confinement";
    case PS_ERR_ACCURACY_REGRESSION: return "accuracy-regression";
    case PS_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ps_last_error(void) { return last_error.c_str(); }

void ps_free_string(char* s) { std::free(s); }

ps_status ps_keygen(const char* params, int64_t seed, const char* pk_path, const char* sk_path, const char* ek_path) {
  return guarded([&] {
    need(params, "params");
    need(pk_path, "pk_path");
    need(sk_path, "sk_path");
    need(ek_path, "ek_path");
    const auto keys = he::keygen(params_by_name(params), seed_of(seed));
    io::write_file(pk_path, he::serialize(keys.pk));
    io::write_file(ek_path, he::serialize(keys.ek));
    io::write_file(sk_path, he::serialize(keys.sk));
    return PS_OK;
  });
}

ps_status ps_parameter_sets(char** names) {
  return guarded([&] {
    need(names, "names");
    std::string out;
    for (const auto& n : he::parameter_set_names()) out += (out.empty() ? "" : ",") + n;
    *names = dup_string(out);
    return PS_OK;
  });
}

ps_status ps_model_load(const char* path, ps_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new_model(io::load_model(path));
    return PS_OK;
  });
}

ps_status ps_model_save(const ps_model* model, const char* path) {
  return guarded([&] {
    need(model, "model");
    need(path, "path");
    io::save_model(model->bundle, path);
    return PS_OK;
  });
}

void ps_model_free(ps_model* model) { delete model; }

ps_status ps_model_describe(const ps_model* model, char** json) {
  return guarded([&] {
    need(model, "model");
    need(json, "json");
    const auto& net = model->bundle.net;
    nlohmann::ordered_json j;
    j["input_shape"] = net.input_shape();
    j["output_dim"] = net.output_dim();
    j["he_compatible"] = net.he_compatible();
    std::vector<std::string> kinds;
    for (const auto& l : net.layers()) kinds.emplace_back(to_string(l.kind));
    j["layers"] = kinds;
    if (net.he_compatible()) j["multiplicative_depth"] = multiplicative_depth(net).depth;
    if (model->bundle.plan) j["quantization_bits"] = model->bundle.plan->bits;
    j["input_bits"] = model->bundle.input_bits;
    j["weight_bits"] = model->bundle.weight_bits;
    *json = dup_string(j.dump(2));
    return PS_OK;
  });
}

ps_status ps_model_plan_parameters(const ps_model* model, char** params) {
  return guarded([&] {
    need(params, "params");
    const auto& net = he_network(model);
    *params = dup_string(he::plan_parameters(net, model->bundle.input_bits, model->bundle.weight_bits).name);
    return PS_OK;
  });
}

void ps_train_options_init(ps_train_options* options) {
  if (!options) return;
  static const size_t kHidden[] = {32, 32, 32};
  options->hidden = kHidden;
  options->hidden_count = 3;
  options->activation = "relu";
  options->epochs = 20;
  options->learning_rate = 0.02;
  options->minibatch_size = 64;
  options->seed = 1;
  options->task_seed = 1;
}

ps_status ps_train(const ps_train_options* options, ps_model** out, double* heldout_accuracy) {
  return guarded([&] {
    need(options, "options");
    need(out, "out");
    require(options->hidden_count == 0 || options->hidden != nullptr, ErrorCode::InvalidArgument,
            "hidden widths must not be null");
    const std::string act = options->activation ? options->activation : "relu";
    require(act == "relu" || act == "sigmoid", ErrorCode::Config, "activation must be relu or sigmoid");
    require(options->epochs >= 0, ErrorCode::Config, "epochs must be non-negative");
    const auto task = train::make_toy_task(options->task_seed);
    train::TrainConfig cfg;
    cfg.learning_rate = options->learning_rate;
    cfg.minibatch_size = options->minibatch_size;
    cfg.seed = options->seed;
    const std::vector<std::size_t> hidden(options->hidden, options->hidden + options->hidden_count);
    const auto net = train::make_mlp(task.dims, hidden, task.classes,
                                     act == "relu" ? LayerKind::ReLU : LayerKind::Sigmoid, options->seed + 1);
    io::ModelBundle bundle;
    bundle.net = train::train_float(net, task.train, nullptr, cfg, options->epochs);
    if (heldout_accuracy) *heldout_accuracy = train::evaluate(bundle.net, task.test).accuracy;
    *out = new_model(std::move(bundle));
    return PS_OK;
  });
}

ps_status ps_convert(const ps_model* model, int finetune_epochs, double learning_rate, uint64_t seed,
                     uint64_t task_seed, ps_model** out, double* heldout_accuracy) {
  return guarded([&] {
    need(model, "model");
    need(out, "out");
    require(finetune_epochs >= 0, ErrorCode::Config, "fine-tuning epochs must be non-negative");
    io::ModelBundle bundle;
    bundle.net = convert_to_dpn(model->bundle.net);
    const bool need_task = finetune_epochs > 0 || heldout_accuracy != nullptr;
    if (need_task) {
      const auto task = train::make_toy_task(task_seed);
      if (finetune_epochs > 0) {
        train::TrainConfig cfg;
        cfg.learning_rate = learning_rate;
        cfg.max_grad_norm = 1.0;
        cfg.seed = seed;
        bundle.net = train::train_float(bundle.net, task.train, nullptr, cfg, finetune_epochs);
      }
      if (heldout_accuracy) *heldout_accuracy = train::evaluate(bundle.net, task.test).accuracy;
    }
    *out = new_model(std::move(bundle));
    return PS_OK;
  });
}

void ps_quantize_options_init(ps_quantize_options* options) {
  if (!options) return;
  options->bits = 8;
  options->retrain_epochs = 10;
  options->learning_rate = 0.003;
  options->seed = 1;
  options->task_seed = 1;
  options->report_path = nullptr;
}

ps_status ps_quantize(const ps_model* model, const ps_quantize_options* options, ps_model** out,
                      double* quantized_accuracy, double* retrained_accuracy) {
  return guarded([&] {
    need(model, "model");
    need(options, "options");
    need(out, "out");
    const auto task = train::make_toy_task(options->task_seed);
    train::TrainConfig cfg;
    cfg.bits = options->bits;
    cfg.retrain_epochs = options->retrain_epochs;
    cfg.learning_rate = options->learning_rate;
    cfg.max_grad_norm = 1.0;
    cfg.seed = options->seed;
    auto m = train::fit_and_retrain(model->bundle.net, task.train, &task.test, cfg);
    if (quantized_accuracy) *quantized_accuracy = m.report.last(train::Phase::CodebookFit)->heldout_accuracy;
    if (retrained_accuracy) *retrained_accuracy = m.report.epochs.back().heldout_accuracy;
    if (options->report_path) m.report.write_csv(options->report_path);
    io::ModelBundle bundle;
    bundle.net = std::move(m.net);
    bundle.plan = std::move(m.plan);
    bundle.input_bits = model->bundle.input_bits;
    bundle.weight_bits = model->bundle.weight_bits;
    *out = new_model(std::move(bundle));
    return PS_OK;
  });
}

ps_status ps_bench(const int* bits, size_t count, uint64_t seed, int assert_trend, char** grid_csv) {
  return guarded([&] {
    need(bits, "bits");
    need(grid_csv, "grid_csv");
    train::BenchConfig cfg;
    cfg.bits.assign(bits, bits + count);
    cfg.seed = seed;
    const auto r = train::run_bench(cfg);
    *grid_csv = dup_string(r.csv());
    if (assert_trend && !r.quantize_only_monotone())
      return fail(PS_ERR_ACCURACY_REGRESSION, "quantize-only accuracy rises as the bit width shrinks");
    return PS_OK;
  });
}

ps_status ps_export_toy_features(const char* path, size_t frames, size_t offset, uint64_t task_seed) {
  return guarded([&] {
    need(path, "path");
    const auto task = train::make_toy_task(task_seed);
    require(offset + frames <= task.test.size(), ErrorCode::Config,
            "the toy test split has only " + std::to_string(task.test.size()) + " frames");
    io::FeatureFile f;
    f.dims = task.dims;
    for (std::size_t i = offset; i < offset + frames; ++i) {
      const auto row = slice_row(task.test.frames, i);
      f.frames.push_back(row.data);
    }
    io::save_features(path, f);
    return PS_OK;
  });
}

void ps_server_options_init(ps_server_options* options) {
  if (!options) return;
  options->listen = "127.0.0.1:7700";
  options->params = nullptr;
  options->pk_path = nullptr;
  options->ek_path = nullptr;
  options->threads = 1;
  options->max_connections = 0;
  options->log_path = nullptr;
}

ps_status ps_server_create(const ps_model* model, const ps_server_options* options, ps_server** out) {
  return guarded([&] {
    need(options, "options");
    need(out, "out");
    need(options->listen, "options.listen");
    const auto& net = he_network(model);
    require((options->pk_path == nullptr) == (options->ek_path == nullptr), ErrorCode::Config,
            "serving with fixed keys needs both pk and ek");
    proto::ServerConfig cfg;
    cfg.model = he::compile_for_he(net, model->bundle.input_bits, model->bundle.weight_bits);
    cfg.threads = std::max<std::size_t>(1, options->threads);
    if (options->params) {
      for (const auto& name : split(options->params, ',')) cfg.supported.push_back(params_by_name(name));
      require(!cfg.supported.empty(), ErrorCode::Config, "no parameter set given");
    }
    if (options->pk_path) {
      proto::PinnedKeys pinned{io::read_file(options->pk_path), io::read_file(options->ek_path)};
      // Parsing refuses secret-key files and checks both keys belong together.
      const auto pk = he::deserialize_public_key(pinned.public_key);
      const auto ek = he::deserialize_eval_key(pinned.eval_key);
      require(pk.context->params() == ek.context->params(), ErrorCode::Config,
              "public and evaluation keys use different parameters");
      if (cfg.supported.empty()) cfg.supported.push_back(pk.context->params());
      cfg.pinned = std::move(pinned);
    }
    if (cfg.supported.empty()) {
      cfg.supported = he::fitting_parameter_sets(net, model->bundle.input_bits, model->bundle.weight_bits);
      require(!cfg.supported.empty(), ErrorCode::NoParameterSet,
              "no built-in parameter set holds this model's circuit");
    }
    auto s = std::make_unique<ps_server>();
    if (options->log_path) {
      s->log = std::make_unique<std::ofstream>(options->log_path, std::ios::app);
      require(static_cast<bool>(*s->log), ErrorCode::Io, std::string("cannot open log file ") + options->log_path);
      cfg.log = s->log.get();
    }
    s->server = std::make_unique<proto::Server>(std::move(cfg));
    s->listener = std::make_unique<proto::TcpListener>(proto::parse_endpoint(options->listen));
    s->max_connections = options->max_connections;
    *out = s.release();
    return PS_OK;
  });
}

uint16_t ps_server_port(const ps_server* server) { return server ? server->listener->port() : 0; }

ps_status ps_server_run(ps_server* server) {
  return guarded([&] {
    need(server, "server");
    proto::serve_tcp(*server->server, *server->listener, server->max_connections);
    return PS_OK;
  });
}

void ps_server_stop(ps_server* server) {
  if (server) server->listener->close();
}

void ps_server_free(ps_server* server) { delete server; }

void ps_client_options_init(ps_client_options* options) {
  if (!options) return;
  options->params = "mid4096";
  options->seed = -1;
  options->batch_size = 0;
  options->softmax = 0;
  options->pk_path = nullptr;
  options->sk_path = nullptr;
  options->ek_path = nullptr;
}

ps_status ps_client_connect(const char* endpoint, const ps_client_options* options, ps_client** out) {
  return guarded([&] {
    need(endpoint, "endpoint");
    need(out, "out");
    auto c = std::make_unique<ps_client>();
    c->session = make_session(options);
    c->channel = proto::TcpChannel::connect(proto::parse_endpoint(endpoint));
    return finish_client(std::move(c), out);
  });
}

ps_status ps_client_local(const ps_model* model, const ps_client_options* options, size_t threads, ps_client** out) {
  return guarded([&] {
    need(out, "out");
    const auto& net = he_network(model);
    auto c = std::make_unique<ps_client>();
    c->session = make_session(options);
    proto::ServerConfig cfg;
    cfg.model = he::compile_for_he(net, model->bundle.input_bits, model->bundle.weight_bits);
    cfg.supported = {c->session->params()};
    cfg.threads = std::max<std::size_t>(1, threads);
    c->local_server = std::make_unique<proto::Server>(std::move(cfg));
    c->channel = std::make_unique<proto::InProcessChannel>(*c->local_server);
    return finish_client(std::move(c), out);
  });
}

ps_status ps_client_infer_file(ps_client* client, const char* features_path, const char* graph_path,
                               ps_result** out) {
  return guarded([&] {
    need(features_path, "features_path");
    const auto f = io::load_features(features_path);
    return run_utterance(client, f.frames, graph_path, out);
  });
}

ps_status ps_client_infer(ps_client* client, const float* frames, size_t frame_count, size_t dims,
                          const char* graph_path, ps_result** out) {
  return guarded([&] {
    require(frame_count == 0 || frames != nullptr, ErrorCode::InvalidArgument, "frames must not be null");
    std::vector<std::vector<double>> rows(frame_count, std::vector<double>(dims));
    for (std::size_t i = 0; i < frame_count; ++i)
      for (std::size_t d = 0; d < dims; ++d) rows[i][d] = frames[i * dims + d];
    return run_utterance(client, rows, graph_path, out);
  });
}

ps_status ps_client_latency_csv(const ps_client* client, char** csv) {
  return guarded([&] {
    need(client, "client");
    need(csv, "csv");
    *csv = dup_string(client->report.csv());
    return PS_OK;
  });
}

ps_status ps_client_latency_table(const ps_client* client, char** table) {
  return guarded([&] {
    need(client, "client");
    need(table, "table");
    *table = dup_string(client->report.table());
    return PS_OK;
  });
}

ps_status ps_client_close(ps_client* client) {
  return guarded([&] {
    need(client, "client");
    client->client->close();
    return PS_OK;
  });
}

void ps_client_free(ps_client* client) { delete client; }

size_t ps_result_frames(const ps_result* result) { return result ? result->frames : 0; }
size_t ps_result_dims(const ps_result* result) { return result ? result->dims : 0; }
const double* ps_result_scores(const ps_result* result) { return result ? result->scores.data() : nullptr; }

int ps_result_flagged(const ps_result* result, size_t frame) {
  return result && frame < result->flagged.size() ? result->flagged[frame] : 0;
}

const char* ps_result_transcript(const ps_result* result) { return result ? result->transcript.c_str() : ""; }

void ps_result_latency(const ps_result* result, double out[5]) {
  if (!result || !out) return;
  std::copy(result->latency, result->latency + 5, out);
}

ps_status ps_result_save_posteriors(const ps_result* result, const char* path) {
  return guarded([&] {
    need(result, "result");
    need(path, "path");
    io::PosteriorFile p;
    p.dims = result->dims;
    p.probabilities = result->probabilities;
    for (std::size_t i = 0; i < result->frames; ++i) {
      const auto* row = result->scores.data() + i * result->dims;
      p.frames.push_back({result->indices[i], std::vector<double>(row, row + result->dims)});
      p.flagged.push_back(result->flagged[i] != 0);
    }
    io::save_posteriors(path, p);
    return PS_OK;
  });
}

void ps_result_free(ps_result* result) { delete result; }

ps_status ps_decode_file(const char* posteriors_path, const char* graph_path, char** transcript) {
  return guarded([&] {
    need(posteriors_path, "posteriors_path");
    need(transcript, "transcript");
    const auto p = io::load_posteriors(posteriors_path);
    require(!p.frames.empty(), ErrorCode::Config, "posterior file has no frames");
    const DecodeGraph graph = graph_path ? load_graph(graph_path) : DecodeGraph::uniform(p.dims);
    const auto v = viterbi(io::decoding_scores(p), graph);
    *transcript = dup_string(polyscore::transcript(v.path, graph));
    return PS_OK;
  });
}

ps_status ps_selftest(const char* params, size_t sequences, uint64_t seed, char** report) {
  return guarded([&] {
    need(params, "params");
    need(report, "report");
    const auto r = he::sim_real_differential(params_by_name(params), sequences, seed);
    *report = dup_string(r.summary());
    if (!r.passed()) return fail(PS_ERR_INTERNAL, "simulated and real backends disagree: " + r.summary());
    return PS_OK;
  });
}

}  // extern "C"
