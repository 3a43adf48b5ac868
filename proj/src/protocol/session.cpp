#include "protocol/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <thread>

#include "common/bytes.hpp"
#include "common/random.hpp"
#include "hecrypt/circuit.hpp"
#include "hecrypt/serialize.hpp"

namespace polyscore::proto {

namespace {

constexpr std::uint32_t kServerStateMagic = 0x53535350;  // "PSSS"

std::string describe(const he::HeParams& p) {
  return p.backend == he::Backend::Sim ? p.name + "/sim" : p.name;
}

std::string join(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ", ") + n;
  return out;
}

/// Re-raises a deserialization failure as a protocol error.
template <class F>
auto as_protocol(const char* what, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Protocol) throw;
    raise(ErrorCode::Protocol, std::string(what) + ": " + e.what());
  }
}

void write_blob(ByteWriter& w, const std::vector<std::uint8_t>& bytes) {
  w.u64(bytes.size());
  w.bytes(bytes);
}

std::span<const std::uint8_t> read_blob(ByteReader& r) {
  const auto n = r.u64();
  r.check(n <= r.remaining(), "truncated key blob");
  return r.bytes(static_cast<std::size_t>(n));
}

void write_model(ByteWriter& w, const FixedPointNetwork& net) {
  w.u32(static_cast<std::uint32_t>(net.input_size));
  w.u32(static_cast<std::uint32_t>(net.output_size));
  w.i32(net.input_scale_bits);
  w.i32(net.weight_scale_bits);
  w.i32(net.output_scale_bits);
  w.u32(static_cast<std::uint32_t>(net.ops.size()));
  for (const auto& op : net.ops) {
    w.u8(static_cast<std::uint8_t>(op.kind));
    w.u32(static_cast<std::uint32_t>(op.in_size));
    w.u32(static_cast<std::uint32_t>(op.out_size));
    w.i32(op.in_scale_bits);
    w.i32(op.out_scale_bits);
    w.i32(op.coeff_bits);
    w.i64(op.cubic_coeff);
    w.u32(static_cast<std::uint32_t>(op.rows.size()));
    for (const auto& row : op.rows) {
      w.f64(row.bias);
      w.u32(static_cast<std::uint32_t>(row.terms.size()));
      for (const auto& [j, v] : row.terms) {
        w.u32(j);
        w.i64(v);
      }
    }
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> scores) {
  require(!scores.empty(), ErrorCode::InvalidArgument, "softmax of an empty vector");
  const double hi = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) sum += out[i] = std::exp(scores[i] - hi);
  for (auto& v : out) v /= sum;
  return out;
}

// ---------------------------------------------------------------- client

ClientSession::ClientSession(ClientConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.params.validate();
  require(cfg_.batch_size >= 1 && cfg_.batch_size <= 4096, ErrorCode::Config, "batch size must lie in [1, 4096]");
  const std::uint64_t seed = cfg_.seed.value_or(entropy_seed());
  if (cfg_.keys) {
    require(cfg_.keys->pk.context && cfg_.keys->sk.context && cfg_.keys->ek.context, ErrorCode::InvalidArgument,
            "incomplete session keys");
    require(cfg_.keys->pk.context->params() == cfg_.params && cfg_.keys->sk.context->params() == cfg_.params &&
                cfg_.keys->ek.context->params() == cfg_.params,
            ErrorCode::ParameterMismatch, "keys were generated for different parameters");
    keys_ = std::move(*cfg_.keys);
    cfg_.keys.reset();
  } else {
    keys_ = he::keygen(cfg_.params, seed);
  }
  encryptor_ = std::make_unique<he::Encryptor>(keys_.pk, seed ^ 0x9e3779b97f4a7c15ULL);
  decryptor_ = std::make_unique<he::Decryptor>(keys_.sk);
  Rng rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  for (std::size_t i = 0; i < id_.size(); i += 8) {
    const auto v = rng();
    for (std::size_t b = 0; b < 8; ++b) id_[i + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
}

ClientSession::~ClientSession() = default;

const HelloReply& ClientSession::server_info() const {
  require(server_.has_value(), ErrorCode::Protocol, "session not negotiated yet");
  return *server_;
}

WireMessage ClientSession::make(MessageType type, std::vector<std::uint8_t> payload) {
  WireMessage m;
  m.type = type;
  m.session_id = id_;
  m.sequence = ++sent_;
  m.payload = std::move(payload);
  return m;
}

void ClientSession::check_reply(const WireMessage& m, MessageType expected, State state) {
  require(state_ == state, ErrorCode::Protocol, std::string("unexpected ") + to_string(m.type) + " reply");
  require(m.session_id == id_, ErrorCode::Protocol, "reply carries a different session id");
  require(m.sequence == received_ + 1, ErrorCode::Protocol, "out-of-order sequence number");
  received_ = m.sequence;
  if (m.type == MessageType::Error) {
    state_ = State::Closed;
    const auto err = decode_error(m.payload);
    std::string msg = "server: " + err.message;
    if (!err.supported.empty()) msg += " (supported: " + join(err.supported) + ")";
    raise(err.code, msg);
  }
  if (m.type != expected) {
    state_ = State::Closed;
    raise(ErrorCode::Protocol, std::string("expected ") + to_string(expected) + ", got " + to_string(m.type));
  }
}

WireMessage ClientSession::hello() {
  require(state_ == State::Start, ErrorCode::Protocol, "HELLO already sent");
  state_ = State::HelloSent;
  return make(MessageType::Hello, proto::encode(HelloRequest{cfg_.params, static_cast<std::uint32_t>(cfg_.batch_size)}));
}

void ClientSession::accept_hello(const WireMessage& reply) {
  check_reply(reply, MessageType::Hello, State::HelloSent);
  auto info = decode_hello_reply(reply.payload);
  require(info.params == cfg_.params, ErrorCode::ParameterMismatch, "server answered with different parameters");
  require(info.input_dim > 0 && info.output_dim > 0, ErrorCode::Protocol, "server advertised an empty model");
  server_ = std::move(info);
  state_ = State::Negotiated;
}

WireMessage ClientSession::eval_keys() {
  require(state_ == State::Negotiated, ErrorCode::Protocol, "EVAL_KEYS before a negotiated HELLO");
  ByteWriter w;
  write_blob(w, he::serialize(keys_.pk));
  write_blob(w, he::serialize(keys_.ek));
  state_ = State::KeysSent;
  return make(MessageType::EvalKeys, w.take());
}

void ClientSession::accept_eval_keys(const WireMessage& reply) {
  check_reply(reply, MessageType::EvalKeys, State::KeysSent);
  require(reply.payload.empty(), ErrorCode::Protocol, "EVAL_KEYS acknowledgement carries a payload");
  state_ = State::Ready;
}

EncodedFrames ClientSession::encode(const std::vector<std::vector<double>>& frames, std::size_t first_index) const {
  require(state_ == State::Ready, ErrorCode::Protocol, "session is not ready for data");
  const auto& info = *server_;
  EncodedFrames out;
  out.first_index = first_index;
  out.frames.reserve(frames.size());
  for (std::size_t f = 0; f < frames.size(); ++f) {
    require(frames[f].size() == info.input_dim, ErrorCode::ShapeMismatch,
            "frame " + std::to_string(first_index + f) + " has " + std::to_string(frames[f].size()) +
                " features, model expects " + std::to_string(info.input_dim));
    std::vector<std::uint64_t> enc;
    enc.reserve(frames[f].size());
    for (double v : frames[f]) enc.push_back(he::encode_fixed(v, info.input_scale_bits, cfg_.params.t));
    out.frames.push_back(std::move(enc));
  }
  return out;
}

WireMessage ClientSession::encrypt_batch(const EncodedFrames& encoded, std::size_t begin, std::size_t end) {
  require(state_ == State::Ready, ErrorCode::Protocol, "session is not ready for data");
  require(begin < end && end <= encoded.frames.size(), ErrorCode::InvalidArgument, "empty or out-of-range batch");
  require(end - begin <= cfg_.batch_size, ErrorCode::InvalidArgument, "batch larger than the negotiated size");
  const int scale = server_->input_scale_bits;
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(end - begin));
  for (std::size_t f = begin; f < end; ++f) {
    const std::size_t index = encoded.first_index + f;
    w.u64(index);
    w.u32(static_cast<std::uint32_t>(encoded.frames[f].size()));
    for (auto m : encoded.frames[f]) he::write_ciphertext(w, encryptor_->encrypt(m, scale));
    pending_.push_back(index);
  }
  return make(MessageType::FeatureBatch, w.take());
}

std::vector<ScoredFrame> ClientSession::read_posteriors(const WireMessage& reply) {
  check_reply(reply, MessageType::PosteriorBatch, State::Ready);
  const auto& info = *server_;
  const auto ctx = keys_.pk.context;
  // Parse everything before decrypting so a malformed batch yields nothing.
  struct Parsed {
    std::size_t index;
    std::vector<he::Ciphertext> cts;
  };
  std::vector<Parsed> parsed;
  {
    ByteReader r(reply.payload, ErrorCode::Protocol, "POSTERIOR_BATCH");
    const auto count = r.u32();
    r.check(count >= 1 && count <= pending_.size(), "frame count does not match pending frames");
    for (std::uint32_t k = 0; k < count; ++k) {
      Parsed p;
      p.index = static_cast<std::size_t>(r.u64());
      r.check(p.index == pending_[k], "frame order not preserved");
      r.check(r.u32() == info.output_dim, "wrong number of scores");
      for (std::uint32_t j = 0; j < info.output_dim; ++j) {
        auto ct = he::read_ciphertext(r, ctx);
        r.check(ct.size() == 2, "posterior ciphertext is not relinearized");
        r.check(ct.scale_bits == info.output_scale_bits, "scale metadata inconsistent with the model");
        p.cts.push_back(std::move(ct));
      }
      parsed.push_back(std::move(p));
    }
    r.expect_done();
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(parsed.size()));

  std::vector<ScoredFrame> out;
  out.reserve(parsed.size());
  for (const auto& p : parsed) {
    ScoredFrame sf;
    sf.frame.frame_index = p.index;
    sf.frame.scores.reserve(p.cts.size());
    for (const auto& ct : p.cts) {
      try {
        sf.frame.scores.push_back(he::decode_fixed(decryptor_->decrypt(ct), ct.scale_bits, cfg_.params.t));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::BudgetExhausted) throw;
        sf.flagged = true;
        sf.reason = e.what();
        break;
      }
    }
    if (sf.flagged) {
      sf.frame.scores.assign(p.cts.size(), 0.0);
    } else if (cfg_.softmax) {
      sf.frame.scores = softmax(sf.frame.scores);
    }
    out.push_back(std::move(sf));
  }
  return out;
}

WireMessage ClientSession::bye() {
  require(state_ == State::Ready || state_ == State::Negotiated, ErrorCode::Protocol, "no open session to close");
  state_ = State::ByeSent;
  return make(MessageType::Bye, {});
}

void ClientSession::accept_bye(const WireMessage& reply) {
  check_reply(reply, MessageType::Bye, State::ByeSent);
  state_ = State::Closed;
}

// ---------------------------------------------------------------- server

std::vector<std::uint8_t> ServerSession::serialize() const {
  ByteWriter w;
  w.u32(kServerStateMagic);
  w.bytes(id);
  he::write_params(w, params);
  w.u32(batch_size);
  w.u64(received);
  w.u64(sent);
  write_blob(w, pk ? he::serialize(*pk) : std::vector<std::uint8_t>{});
  write_blob(w, ek ? he::serialize(*ek) : std::vector<std::uint8_t>{});
  if (model) write_model(w, *model);
  return w.take();
}

Server::Server(ServerConfig cfg) : cfg_(std::move(cfg)) {
  require(cfg_.model.input_size > 0 && cfg_.model.output_size > 0, ErrorCode::Config, "server model is empty");
  require(cfg_.threads >= 1, ErrorCode::Config, "server needs at least one worker thread");
  if (cfg_.pinned) {
    const auto pk = as_protocol("pinned public key", [&] { return he::deserialize_public_key(cfg_.pinned->public_key); });
    const auto ek = as_protocol("pinned evaluation key", [&] { return he::deserialize_eval_key(cfg_.pinned->eval_key); });
    require(pk.context->params() == ek.context->params(), ErrorCode::Config, "pinned keys use different parameters");
    const auto& p = pk.context->params();
    std::erase_if(cfg_.supported, [&](const he::HeParams& s) { return !(s == p); });
    if (cfg_.supported.empty()) cfg_.supported.push_back(p);
  }
  require(!cfg_.supported.empty(), ErrorCode::Config, "server supports no parameter set");
  for (const auto& p : cfg_.supported) p.validate();
  model_ = std::make_shared<const FixedPointNetwork>(cfg_.model);
}

std::unique_ptr<ServerConnection> Server::open() { return std::make_unique<ServerConnection>(*this); }

std::vector<std::string> Server::supported_names() const {
  std::vector<std::string> out;
  for (const auto& p : cfg_.supported) out.push_back(describe(p));
  return out;
}

std::size_t Server::sessions_started() const {
  std::lock_guard lock(mutex_);
  return seen_.size();
}

bool Server::claim(const SessionId& id) {
  std::lock_guard lock(mutex_);
  return seen_.insert(id).second;
}

void Server::log_batch(const SessionId& id, std::uint64_t sequence, std::size_t frames, double ms) {
  if (!cfg_.log) return;
  std::lock_guard lock(mutex_);
  *cfg_.log << to_hex(id) << ',' << sequence << ',' << frames << ',' << ms << '\n';
  cfg_.log->flush();
}

WireMessage ServerConnection::reply(MessageType type, std::vector<std::uint8_t> payload) {
  WireMessage m;
  m.type = type;
  m.session_id = session_.id;
  m.sequence = ++session_.sent;
  m.payload = std::move(payload);
  return m;
}

std::vector<std::vector<std::uint8_t>> ServerConnection::handle(std::span<const std::uint8_t> frame) {
  if (state_ == State::Closed) return {};
  try {
    const WireMessage m = decode_frame(frame);
    if (state_ == State::AwaitHello) {
      require(m.type == MessageType::Hello, ErrorCode::Protocol,
              std::string("expected HELLO, got ") + to_string(m.type));
      session_.id = m.session_id;
      require(m.sequence == 1, ErrorCode::Protocol, "out-of-order sequence number");
    } else {
      require(m.session_id == session_.id, ErrorCode::Protocol, "message carries a different session id");
      require(m.sequence == session_.received + 1, ErrorCode::Protocol, "out-of-order sequence number");
    }
    session_.received = m.sequence;
    if (m.type == MessageType::Error) {
      state_ = State::Closed;
      return {};
    }
    WireMessage out;
    switch (state_) {
      case State::AwaitHello:
        out = on_hello(m);
        break;
      case State::AwaitKeys:
        require(m.type == MessageType::EvalKeys, ErrorCode::Protocol,
                std::string("expected EVAL_KEYS, got ") + to_string(m.type));
        out = on_eval_keys(m);
        break;
      case State::Ready:
        if (m.type == MessageType::Bye) {
          require(m.payload.empty(), ErrorCode::Protocol, "BYE carries a payload");
          state_ = State::Closed;
          out = reply(MessageType::Bye, {});
          break;
        }
        require(m.type == MessageType::FeatureBatch, ErrorCode::Protocol,
                std::string("unexpected ") + to_string(m.type) + " in an established session");
        out = on_features(m);
        break;
      case State::Closed:
        return {};
    }
    return {encode_frame(out)};
  } catch (const Error& e) {
    state_ = State::Closed;
    ErrorReply err{e.code(), e.what(), {}};
    if (e.code() == ErrorCode::ParameterMismatch) err.supported = server_.supported_names();
    return {encode_frame(reply(MessageType::Error, encode(err)))};
  }
}

WireMessage ServerConnection::on_hello(const WireMessage& m) {
  const auto req = decode_hello_request(m.payload);
  require(server_.claim(m.session_id), ErrorCode::Protocol, "session id already used; replayed HELLO rejected");
  const auto& supported = server_.config().supported;
  const auto it = std::find(supported.begin(), supported.end(), req.params);
  require(it != supported.end(), ErrorCode::ParameterMismatch,
          "parameter set " + describe(req.params) + " (n=" + std::to_string(req.params.n) + ") is not supported");
  const auto& model = *server_.model();
  const double budget = he::static_output_budget(model, he::NoiseModel::for_params(*it), it->t);
  require(budget > 0.0, ErrorCode::BudgetExhausted,
          "model exhausts the noise budget of " + describe(*it) + "; use a larger parameter set");
  session_.params = *it;
  session_.batch_size = req.batch_size;
  session_.model = server_.model();
  state_ = State::AwaitKeys;
  HelloReply info;
  info.params = *it;
  info.input_dim = static_cast<std::uint32_t>(model.input_size);
  info.output_dim = static_cast<std::uint32_t>(model.output_size);
  info.input_scale_bits = model.input_scale_bits;
  info.output_scale_bits = model.output_scale_bits;
  info.supported = server_.supported_names();
  return reply(MessageType::Hello, encode(info));
}

WireMessage ServerConnection::on_eval_keys(const WireMessage& m) {
  ByteReader r(m.payload, ErrorCode::Protocol, "EVAL_KEYS");
  const auto pk_bytes = read_blob(r);
  const auto ek_bytes = read_blob(r);
  r.expect_done();
  for (auto blob : {pk_bytes, ek_bytes}) {
    ByteReader peek(blob, ErrorCode::Protocol, "EVAL_KEYS");
    require(!(blob.size() >= 4 && peek.u32() == he::kSecretKeyMagic), ErrorCode::KeyConfinement,
            "secret key material offered to the server; refused");
  }
  auto pk = as_protocol("public key", [&] { return he::deserialize_public_key(pk_bytes); });
  auto ek = as_protocol("evaluation key", [&] { return he::deserialize_eval_key(ek_bytes); });
  require(pk.context->params() == session_.params && ek.context->params() == session_.params,
          ErrorCode::ParameterMismatch, "keys do not match the negotiated parameters");
  if (const auto& pin = server_.config().pinned) {
    require(std::equal(pk_bytes.begin(), pk_bytes.end(), pin->public_key.begin(), pin->public_key.end()) &&
                std::equal(ek_bytes.begin(), ek_bytes.end(), pin->eval_key.begin(), pin->eval_key.end()),
            ErrorCode::Protocol, "keys differ from the ones this server is pinned to");
  }
  session_.pk = std::make_shared<const he::PublicKey>(std::move(pk));
  session_.ek = std::make_shared<const he::EvalKey>(std::move(ek));
  evaluator_ = std::make_unique<he::Evaluator>(session_.pk->context, session_.ek);
  state_ = State::Ready;
  return reply(MessageType::EvalKeys, {});
}

WireMessage ServerConnection::on_features(const WireMessage& m) {
  const auto start = std::chrono::steady_clock::now();
  const auto& model = *session_.model;
  const auto ctx = session_.pk->context;
  std::vector<std::uint64_t> indices;
  std::vector<std::vector<he::Ciphertext>> inputs;
  {
    ByteReader r(m.payload, ErrorCode::Protocol, "FEATURE_BATCH");
    const auto count = r.u32();
    r.check(count >= 1 && count <= session_.batch_size, "frame count outside the negotiated batch size");
    for (std::uint32_t k = 0; k < count; ++k) {
      indices.push_back(r.u64());
      r.check(r.u32() == model.input_size, "frame dimension does not match the model");
      std::vector<he::Ciphertext> frame;
      frame.reserve(model.input_size);
      for (std::size_t j = 0; j < model.input_size; ++j) {
        auto ct = he::read_ciphertext(r, ctx);
        r.check(ct.size() == 2, "feature ciphertext must have two parts");
        r.check(ct.scale_bits == model.input_scale_bits, "feature scale does not match the model");
        frame.push_back(std::move(ct));
      }
      inputs.push_back(std::move(frame));
    }
    r.expect_done();
  }

  std::vector<std::vector<he::Ciphertext>> outputs(inputs.size());
  const std::size_t workers = std::min(server_.config().threads, inputs.size());
  if (workers <= 1) {
    for (std::size_t f = 0; f < inputs.size(); ++f) outputs[f] = he::encrypted_forward(*evaluator_, model, inputs[f]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t f = w; f < inputs.size(); f += workers)
            outputs[f] = he::encrypted_forward(*evaluator_, model, inputs[f]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(outputs.size()));
  for (std::size_t f = 0; f < outputs.size(); ++f) {
    w.u64(indices[f]);
    w.u32(static_cast<std::uint32_t>(outputs[f].size()));
    for (const auto& ct : outputs[f]) {
      require(ct.noise_budget > 0.0, ErrorCode::BudgetExhausted,
              "predicted noise budget exhausted; use a larger parameter set");
      he::write_ciphertext(w, ct);
    }
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  server_.log_batch(session_.id, m.sequence, outputs.size(), ms);
  return reply(MessageType::PosteriorBatch, w.take());
}

}  // namespace polyscore::proto
