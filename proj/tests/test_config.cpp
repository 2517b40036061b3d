#include <semimodal/config.hpp>

#include <gtest/gtest.h>

using namespace semimodal;

namespace {

std::string config_error_message(const std::string& text)
{
  try {
    parse_config_string(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "accepted:\n" << text;
  return {};
}

} // namespace

TEST(Config, DefaultsWhenEmpty)
{
  const auto c = parse_config_string("");
  EXPECT_EQ(c.run.seed, 1u);
  EXPECT_EQ(c.bandwidth.background, "plugin_gradient");
  EXPECT_EQ(c.bandwidth.grid_points, 30u);
  EXPECT_DOUBLE_EQ(c.modetest.alpha, 0.001);
  EXPECT_EQ(c.modetest.replicates, 1000u);
  EXPECT_FALSE(c.modetest.bandwidth);
  EXPECT_DOUBLE_EQ(c.meanshift.min_cluster_fraction, 0.01);
  EXPECT_EQ(c.varselect.subset_size, 3u);
  EXPECT_DOUBLE_EQ(c.data.test_fraction, 0.5);
}

TEST(Config, ParsesEverySection)
{
  const auto c = parse_config_string(R"(
# comment
[run]
seed = 99
threads = 2
output_dir = out
canonical_output = true

[data]
background = b.csv
experimental = e.csv
label_column = kind
label_background = ttbar
label_signal = zprime
variables = m1, m2
test_fraction = 0.4

[varselect]
enabled = false
iterations = 300
subset_size = 2
threshold = 0.05
permutations = 99

[bandwidth]
background = 0.35
grid = 0.1, 0.2, 0.4
index = ari
plateau_tolerance = 0.05

[meanshift]
tol_step = 1e-7
max_iter = 500
tol_merge = 0.2
min_cluster_fraction = 0

[modetest]
alpha = 0.01
replicates = 250
bandwidth = 0.3

[synth]
background_rows = 10
experimental_rows = 20
test_rows = 5
signal_fraction = 0.25
columns = a, b

[component bg]
mean = 0, 0
sd = 1, 2

[component sig]
weight = 2
mean = 3, 3
covariance = 1, 0.5, 0.5, 1
signal = yes
)");
  EXPECT_EQ(c.run.seed, 99u);
  EXPECT_EQ(c.run.threads, 2u);
  EXPECT_TRUE(c.run.canonical_output);
  EXPECT_EQ(c.data.variables, (std::vector<std::string>{ "m1", "m2" }));
  EXPECT_EQ(c.data.label_signal, "zprime");
  EXPECT_FALSE(c.varselect.enabled);
  EXPECT_EQ(c.varselect.permutations, 99u);
  EXPECT_EQ(c.bandwidth.background, "0.35");
  EXPECT_EQ(c.bandwidth.grid, (std::vector<double>{ 0.1, 0.2, 0.4 }));
  EXPECT_EQ(c.bandwidth.index, AgreementIndex::adjusted_rand);
  EXPECT_EQ(c.meanshift.max_iter, 500);
  EXPECT_DOUBLE_EQ(c.meanshift.min_cluster_fraction, 0.0);
  EXPECT_DOUBLE_EQ(*c.modetest.bandwidth, 0.3);
  EXPECT_EQ(c.synth.columns, (std::vector<std::string>{ "a", "b" }));
  ASSERT_EQ(c.synth.components.size(), 2u);
  EXPECT_TRUE(c.synth.components[1].signal);
  EXPECT_DOUBLE_EQ(c.synth.components[0].component.covariance(1, 1), 4.0);
  EXPECT_DOUBLE_EQ(c.synth.components[1].component.covariance(0, 1), 0.5);
  const auto spec = c.synth.mixture(0.25);
  EXPECT_NEAR(spec.components[0].weight, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(spec.signal_components, std::vector<std::size_t>{ 1 });
}

TEST(Config, RejectsUnknownNamesAndBadValues)
{
  EXPECT_NE(config_error_message("[bandwidth]\nbandwith_grid = 1\n").find("unknown key 'bandwith_grid'"),
            std::string::npos);
  EXPECT_NE(config_error_message("[sweep]\nx = 1\n").find("unknown section"), std::string::npos);
  config_error_message("seed = 3\n");
  config_error_message("[run]\nseed = -1\n");
  config_error_message("[run]\nseed = abc\n");
  config_error_message("[run]\nthreads = 0\n");
  config_error_message("[modetest]\nalpha = 0\n");
  config_error_message("[modetest]\nalpha = 1.5\n");
  config_error_message("[modetest]\nreplicates = 100\n");
  config_error_message("[bandwidth]\nbackground = silverman\n");
  config_error_message("[bandwidth]\nbackground = -0.2\n");
  config_error_message("[bandwidth]\nindex = rand\n");
  config_error_message("[bandwidth]\ngrid = 0.1, x\n");
  config_error_message("[bandwidth]\ngrid_lo_factor = 3\ngrid_hi_factor = 2\n");
  config_error_message("[data]\nlabel_background = s\nlabel_signal = s\n");
  config_error_message("[data]\ntest_fraction = 1\n");
  config_error_message("[varselect]\nenabled = maybe\n");
  config_error_message("[varselect]\npermutations = 10\n");
  config_error_message("[component]\nmean = 0\n");
  config_error_message("[component a]\nsd = 1\n");
  config_error_message("[component a]\nmean = 0, 0\nsd = 1\ncovariance = 1, 0, 0, 1\n");
  config_error_message("[component a]\nmean = 0, 0\ncovariance = 1, 0, 0\n");
  config_error_message("[component a]\nmean = 0, 0\nsd = 1, 2, 3\n");
  config_error_message("[component a]\nmean = 0\nsd = 0\n");
}

TEST(Config, DuplicateKeyReportsLine)
{
  const auto msg = config_error_message("[run]\nseed = 1\nseed = 2\n");
  EXPECT_NE(msg.find(":3"), std::string::npos) << msg;
}

TEST(Config, MixtureNeedsComponents)
{
  const auto c = parse_config_string("[synth]\nbackground_rows = 5\n");
  EXPECT_THROW(c.synth.mixture(0.0), Error);
  const auto bad = parse_config_string("[component a]\nmean = 0\n[component b]\nmean = 0, 1\nsignal = true\n");
  EXPECT_THROW(bad.synth.mixture(0.1), Error);
}

TEST(Config, MissingFileIsIoError)
{
  try {
    load_config("/nonexistent/config.ini");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}
