#include <gtest/gtest.h>

#include "lowlight/error.hpp"
#include "lowlight/report.hpp"

using namespace lowlight;
using namespace lowlight::report;

TEST(Render, AlignmentAndRule) {
  const Table t{{"Name", "Value"}, {{"a", "1.5"}, {"longer", "22"}}};
  EXPECT_EQ(render(t),
            "Name   | Value\n"
            "-------|------\n"
            "a      |   1.5\n"
            "longer |    22\n");
}

TEST(Render, TrailingSpacesTrimmed) {
  const Table t{{"Method", "x"}, {{"m", ""}}};
  EXPECT_EQ(render(t), "Method | x\n-------|--\nm      |\n");
}

TEST(Render, Errors) {
  EXPECT_THROW(render({}), ArgumentError);
  EXPECT_THROW(render({{"a", "b"}, {{"only one"}}}), ArgumentError);
}

TEST(Format, Metrics) {
  EXPECT_EQ(format_metric(eval::kUndefined), "-");
  EXPECT_EQ(format_metric(0.0), "0.0");
  EXPECT_EQ(format_metric(1.0), "100.0");
  EXPECT_EQ(format_metric(0.166), "16.6");
  EXPECT_EQ(format_metric(0.3), "30.0");
  EXPECT_EQ(format_metric(0.169), "16.9");
}

TEST(Tables, EvalTable) {
  eval::Metrics m;
  m.ap = 0.5;
  m.ap50 = 1.0;
  m.ap75 = 0.25;
  m.ap_s = 0.5;
  const auto text = eval_table({{"run", m}});
  EXPECT_EQ(text,
            "Method |   AP |  AP50 | AP75 | AP_S | AP_M | AP_L\n"
            "-------|------|-------|------|------|------|-----\n"
            "run    | 50.0 | 100.0 | 25.0 | 50.0 |    - |    -\n");
}

TEST(Tables, ReferenceNumbers) {
  const auto dp = reference_metrics(nl::NLForm::DotProduct);
  const auto g = reference_metrics(nl::NLForm::Gaussian);
  const auto eg = reference_metrics(nl::NLForm::EmbeddedGaussian);
  EXPECT_EQ(format_metric(dp.ap) + "/" + format_metric(dp.ap50) + "/" + format_metric(dp.ap75), "16.1/29.3/15.7");
  EXPECT_EQ(format_metric(g.ap) + "/" + format_metric(g.ap50) + "/" + format_metric(g.ap75), "16.0/29.1/15.7");
  EXPECT_EQ(format_metric(eg.ap) + "/" + format_metric(eg.ap50) + "/" + format_metric(eg.ap75), "16.6/30.2/16.4");
  EXPECT_EQ(eg.ap_s, eval::kUndefined);
  EXPECT_GT(eg.ap, dp.ap);
  EXPECT_GT(dp.ap, g.ap);
}

TEST(Tables, AblationTable) {
  train::AblationRow row{nl::NLForm::EmbeddedGaussian, {}, {0.5, 0.04, 0.0, 1.0}};
  row.result.initial_loss = 0.2;
  row.result.final_loss = 0.05;
  train::AblationRow flat{nl::NLForm::Gaussian, {}, {}};
  const auto text = ablation_table({row, flat});
  EXPECT_EQ(text,
            "Method            | Ref AP | Ref AP50 | Ref AP75 | Initial loss |   Final loss | Reduction |    w1 |    w2 |    w3 |    w4\n"
            "------------------|--------|----------|----------|--------------|--------------|-----------|-------|-------|-------|------\n"
            "Embedded Gaussian |   16.6 |     30.2 |     16.4 | 2.000000e-01 | 5.000000e-02 |     75.0% | 0.500 | 0.040 | 0.000 | 1.000\n"
            "Gaussian          |   16.0 |     29.1 |     15.7 | 0.000000e+00 | 0.000000e+00 |      0.0% | 0.000 | 0.000 | 0.000 | 0.000\n");
}
