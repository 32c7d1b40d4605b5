#include <gtest/gtest.h>

#include <filesystem>
#include <string>

#include "retard/config.hpp"
#include "retard/io.hpp"

using namespace retard;

namespace {

const std::string kMinimalOu =
    "model.kind = retarded_diffusion\n"
    "model.mu.atom = -1 @ 0\n"
    "model.mu.atom = 0 @ -1\n"
    "model.sigma.form = constant\n"
    "model.sigma.level = 1\n"
    "run.T = 50\n"
    "run.dt = 0.01\n";

bool mentions(const ParseOutcome& out, const std::string& needle) {
  for (const auto& e : out.errors) {
    if (e.message.find(needle) != std::string::npos) return true;
  }
  return false;
}

std::filesystem::path config_dir() { return RETARD_CONFIG_DIR; }

}  // namespace

TEST(ParseConfig, MinimalOuGetsDefaults) {
  auto out = parse_config(kMinimalOu);
  ASSERT_TRUE(out.ok()) << (out.errors.empty() ? "" : out.errors.front().str());
  const auto& cfg = *out.config;
  EXPECT_EQ(cfg.replicas, 1000u);
  EXPECT_EQ(cfg.seed, 1u);
  EXPECT_DOUBLE_EQ(cfg.tau, 1.0);
  ASSERT_EQ(cfg.offsets.size(), 3u);
  EXPECT_DOUBLE_EQ(cfg.offsets[0], 0.0);
  EXPECT_NEAR(cfg.offsets[1], -0.5, 1e-12);
  EXPECT_DOUBLE_EQ(cfg.offsets[2], -1.0);
  ASSERT_EQ(cfg.checkpoints.size(), 8u);
  EXPECT_NEAR(cfg.checkpoints.back(), 50.0, 1e-9);
  EXPECT_EQ(cfg.model.kind, ModelKind::retarded_diffusion);
  EXPECT_EQ(cfg.model.sigma.form, DiffusionForm::constant);
  EXPECT_EQ(cfg.initial_xi().intervals(), 100u);
}

TEST(ParseConfig, MisalignedStepNamesBothKeys) {
  auto out = parse_config(
      "model.kind = retarded_diffusion\n"
      "model.tau = 1.0\n"
      "model.mu.atom = -1 @ -1\n"
      "model.sigma.form = constant\n"
      "run.T = 3\n"
      "run.dt = 0.3\n");
  ASSERT_FALSE(out.ok());
  bool found = false;
  for (const auto& e : out.errors) {
    if (e.message.find("run.dt") != std::string::npos && e.message.find("model.tau") != std::string::npos) {
      found = true;
      EXPECT_EQ(e.line, 6u);
    }
  }
  EXPECT_TRUE(found);
}

TEST(ParseConfig, ShippedEquationFile) {
  auto cfg = parse_config_or_throw(read_text_file(config_dir() / "eq_A3.cfg"));
  ASSERT_EQ(cfg.model.mu.atoms().size(), 1u);
  EXPECT_DOUBLE_EQ(cfg.model.mu.atoms()[0].theta, -1.0);
  EXPECT_DOUBLE_EQ(cfg.model.mu.atoms()[0].weight, -1.0);
  EXPECT_EQ(cfg.model.sigma.form, DiffusionForm::affine_endpoint);
  EXPECT_DOUBLE_EQ(cfg.model.sigma.slope, 0.1);
  EXPECT_DOUBLE_EQ(cfg.model.sigma.lag, 1.0);
  EXPECT_EQ(cfg.replicas, 4000u);
  EXPECT_DOUBLE_EQ(cfg.T, 60.0);
}

TEST(ParseConfig, EveryShippedFileParses) {
  for (const auto& entry : std::filesystem::directory_iterator(config_dir())) {
    if (entry.path().extension() != ".cfg") continue;
    auto out = parse_config(read_text_file(entry.path()));
    EXPECT_TRUE(out.ok()) << entry.path() << ": " << (out.errors.empty() ? "" : out.errors.front().str());
  }
}

TEST(ParseConfig, CollectsEveryErrorWithLines) {
  auto out = parse_config(
      "model.kind = retarded_diffusion\n"
      "model.mu.atom = -1 @ -1\n"
      "model.sigma.form = wobbly\n"
      "run.T = abc\n"
      "bogus.key = 3\n"
      "run.dt = 0.01\n"
      "run.dt = 0.02\n"
      "just some words\n");
  ASSERT_FALSE(out.ok());
  EXPECT_GE(out.errors.size(), 5u);
  auto line_of = [&](const std::string& needle) -> std::size_t {
    for (const auto& e : out.errors) {
      if (e.message.find(needle) != std::string::npos) return e.line;
    }
    return 0;
  };
  EXPECT_EQ(line_of("wobbly"), 3u);
  EXPECT_EQ(line_of("run.T"), 4u);
  EXPECT_EQ(line_of("bogus.key"), 5u);
  EXPECT_EQ(line_of("repeated"), 7u);
  EXPECT_EQ(line_of("key = value"), 8u);
}

TEST(ParseConfig, MissingRequiredKeys) {
  auto out = parse_config("# nothing here\n");
  EXPECT_TRUE(mentions(out, "model.kind"));
  EXPECT_TRUE(mentions(out, "run.T"));
  EXPECT_TRUE(mentions(out, "run.dt"));
}

TEST(ParseConfig, KindSpecificChecks) {
  auto neutral_without_rho = parse_config(
      "model.kind = neutral_diffusion\nmodel.mu.atom = -1 @ -1\nmodel.sigma.form = constant\nrun.T = 1\nrun.dt = 0.1\n");
  EXPECT_TRUE(mentions(neutral_without_rho, "model.rho"));

  auto levy_without_noise = parse_config("model.kind = levy_ou\nmodel.mu.atom = -1 @ -1\nrun.T = 1\nrun.dt = 0.1\n");
  EXPECT_TRUE(mentions(levy_without_noise, "noise.kind"));

  auto heavy = parse_config(
      "model.kind = levy_ou\nmodel.mu.atom = -1 @ -1\nnoise.kind = compound_poisson\nnoise.jump = pareto\n"
      "noise.jump_alpha = 0.8\nrun.T = 1\nrun.dt = 0.1\n");
  EXPECT_FALSE(heavy.ok());
}

TEST(ParseConfig, NeutralWithDensityAndPresets) {
  auto cfg = parse_config_or_throw(
      "model.kind = neutral_diffusion\n"
      "model.mu.atom = -1 @ -1\n"
      "model.rho.atom = -0.3333333333333333 @ -1\n"
      "model.sigma.form = affine_integral\n"
      "model.sigma.slope = 0.05\n"
      "run.T = 10\n"
      "run.dt = 0.01\n"
      "run.offsets = 0, -0.25\n"
      "init.xi = cosine 1 3.141592653589793\n"
      "init.eta = values 0 1 0\n");
  ASSERT_TRUE(cfg.model.rho.has_value());
  EXPECT_NEAR(total_variation(*cfg.model.rho), 1.0 / 3.0, 1e-12);
  auto xi = cfg.initial_xi();
  EXPECT_NEAR(xi.values().front(), -1.0, 1e-12);
  EXPECT_NEAR(xi.values().back(), 1.0, 1e-12);
  EXPECT_TRUE(xi.has_derivative());
  auto eta = cfg.initial_eta();
  EXPECT_NEAR(segment_eval(eta, -0.5), 1.0, 1e-12);
  EXPECT_EQ(cfg.offsets.size(), 2u);
}

TEST(ParseConfig, OrThrowCarriesErrors) {
  try {
    parse_config_or_throw("run.T = 1\n");
    FAIL() << "expected ConfigInvalid";
  } catch (const ConfigInvalid& e) {
    EXPECT_FALSE(e.errors().empty());
  }
}
