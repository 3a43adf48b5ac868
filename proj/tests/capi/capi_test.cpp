#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

#include "polyscore/polyscore.h"

namespace {

namespace fs = std::filesystem;

struct Dir {
  fs::path path;
  Dir() : path(fs::temp_directory_path() / ("polyscore_capi_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~Dir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string take(char* s) {
  std::string out = s ? s : "";
  ps_free_string(s);
  return out;
}

// Small HE-compatible model shared by the tests: one hidden layer, squared.
class CApi : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir = new Dir;
    const size_t hidden[] = {8};
    ps_train_options o;
    ps_train_options_init(&o);
    o.hidden = hidden;
    o.hidden_count = 1;
    o.epochs = 1;
    ps_model* relu = nullptr;
    ASSERT_EQ(ps_train(&o, &relu, &float_acc), PS_OK) << ps_last_error();
    ASSERT_EQ(ps_convert(relu, 0, 0.003, 1, 1, &dpn, nullptr), PS_OK) << ps_last_error();
    ps_model_free(relu);
  }
  static void TearDownTestSuite() {
    ps_model_free(dpn);
    delete dir;
  }
  static Dir* dir;
  static ps_model* dpn;
  static double float_acc;
};

Dir* CApi::dir = nullptr;
ps_model* CApi::dpn = nullptr;
double CApi::float_acc = 0;

TEST_F(CApi, StatusNamesAndErrors) {
  EXPECT_STREQ(ps_status_name(PS_OK), "ok");
  EXPECT_NE(std::string(ps_version()), "");
  ps_model* m = nullptr;
  EXPECT_EQ(ps_model_load((*dir / "missing.json").c_str(), &m), PS_ERR_IO);
  EXPECT_EQ(m, nullptr);
  EXPECT_NE(std::string(ps_last_error()), "");
  EXPECT_EQ(ps_model_load(nullptr, &m), PS_ERR_INVALID_ARGUMENT);
  EXPECT_EQ(ps_keygen("nope", 1, "a", "b", "c"), PS_ERR_CONFIG);
}

TEST_F(CApi, TrainedModelDescribesItself) {
  EXPECT_GT(float_acc, 0.3);
  const auto json = [&] {
    char* s = nullptr;
    EXPECT_EQ(ps_model_describe(dpn, &s), PS_OK);
    return take(s);
  }();
  EXPECT_NE(json.find("\"he_compatible\": true"), std::string::npos) << json;
  char* plan = nullptr;
  ASSERT_EQ(ps_model_plan_parameters(dpn, &plan), PS_OK) << ps_last_error();
  EXPECT_EQ(take(plan), "mid4096");
  const auto path = *dir / "dpn.json";
  ASSERT_EQ(ps_model_save(dpn, path.c_str()), PS_OK);
  ps_model* back = nullptr;
  ASSERT_EQ(ps_model_load(path.c_str(), &back), PS_OK);
  ps_model_free(back);
}

TEST_F(CApi, SecretKeyIsRefusedAsPublicKey) {
  const auto pk = *dir / "k.pk", sk = *dir / "k.sk", ek = *dir / "k.ek";
  ASSERT_EQ(ps_keygen("mid4096", 3, pk.c_str(), sk.c_str(), ek.c_str()), PS_OK) << ps_last_error();
  ps_server_options o;
  ps_server_options_init(&o);
  o.listen = "127.0.0.1:0";
  o.pk_path = sk.c_str();
  o.ek_path = ek.c_str();
  ps_server* s = nullptr;
  EXPECT_EQ(ps_server_create(dpn, &o, &s), PS_ERR_KEY_CONFINEMENT) << ps_last_error();
  EXPECT_EQ(s, nullptr);
  o.pk_path = pk.c_str();
  o.ek_path = sk.c_str();
  EXPECT_EQ(ps_server_create(dpn, &o, &s), PS_ERR_KEY_CONFINEMENT) << ps_last_error();
  o.ek_path = ek.c_str();
  ASSERT_EQ(ps_server_create(dpn, &o, &s), PS_OK) << ps_last_error();
  EXPECT_GT(ps_server_port(s), 0);
  ps_server_free(s);
}

TEST_F(CApi, LocalInferenceDecodesAndSavesPosteriors) {
  const auto feats = *dir / "toy.feat";
  ASSERT_EQ(ps_export_toy_features(feats.c_str(), 6, 0, 1), PS_OK) << ps_last_error();
  ps_client_options o;
  ps_client_options_init(&o);
  o.params = "mid4096";
  o.seed = 5;
  o.softmax = 1;
  ps_client* c = nullptr;
  ASSERT_EQ(ps_client_local(dpn, &o, 1, &c), PS_OK) << ps_last_error();
  ps_result* r = nullptr;
  ASSERT_EQ(ps_client_infer_file(c, feats.c_str(), nullptr, &r), PS_OK) << ps_last_error();
  EXPECT_EQ(ps_result_frames(r), 6u);
  EXPECT_EQ(ps_result_dims(r), 10u);
  for (size_t f = 0; f < 6; ++f) {
    EXPECT_FALSE(ps_result_flagged(r, f));
    double sum = 0;
    for (size_t k = 0; k < 10; ++k) sum += ps_result_scores(r)[f * 10 + k];
    EXPECT_NEAR(sum, 1.0, 1e-9);
  }
  double lat[5];
  ps_result_latency(r, lat);
  for (double v : lat) EXPECT_GT(v, 0.0);
  const std::string transcript = ps_result_transcript(r);
  EXPECT_FALSE(transcript.empty());
  const auto post = *dir / "toy.post";
  ASSERT_EQ(ps_result_save_posteriors(r, post.c_str()), PS_OK);
  char* decoded = nullptr;
  ASSERT_EQ(ps_decode_file(post.c_str(), nullptr, &decoded), PS_OK) << ps_last_error();
  EXPECT_EQ(take(decoded), transcript);
  char* csv = nullptr;
  ASSERT_EQ(ps_client_latency_csv(c, &csv), PS_OK);
  EXPECT_EQ(take(csv).rfind("session,utterance,", 0), 0u);
  EXPECT_EQ(ps_client_close(c), PS_OK);
  ps_result_free(r);
  ps_client_free(c);
}

TEST_F(CApi, MismatchedDimensionsAreRejected) {
  ps_client_options o;
  ps_client_options_init(&o);
  o.params = "mid4096/sim";
  o.seed = 1;
  ps_client* c = nullptr;
  ASSERT_EQ(ps_client_local(dpn, &o, 1, &c), PS_OK) << ps_last_error();
  const float frame[3] = {1, 2, 3};
  ps_result* r = nullptr;
  EXPECT_EQ(ps_client_infer(c, frame, 1, 3, nullptr, &r), PS_ERR_SHAPE_MISMATCH) << ps_last_error();
  EXPECT_EQ(r, nullptr);
  ps_client_free(c);
}

TEST_F(CApi, SelftestPasses) {
  char* report = nullptr;
  EXPECT_EQ(ps_selftest("toy2048", 20, 3, &report), PS_OK) << ps_last_error();
  EXPECT_NE(take(report).find("0 value mismatches"), std::string::npos);
}

}  // namespace
