// Copyright 2026 The mtpdhg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <clocale>
#include <random>

#include "mtpdhg/io.hpp"

using namespace mtpdhg;

namespace {

std::string expect_invalid(const std::function<void()>& f) {
  try {
    f();
  } catch (const InvalidArgument& e) {
    return e.what();
  }
  ADD_FAILURE() << "expected InvalidArgument";
  return "";
}

}  // namespace

TEST(FormatDouble, RoundTrips) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, double(i % 40) - 20.0);
    EXPECT_EQ(parse_double(format_double(x), "t"), x);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.0), "-2");
  EXPECT_TRUE(std::isnan(parse_double(format_double(std::nan("")), "t")));
  EXPECT_EQ(parse_double(format_double(-INFINITY), "t"), -INFINITY);
  EXPECT_EQ(parse_double("+1", "t"), 1.0);
  EXPECT_THROW(parse_double("1.5x", "t"), InvalidArgument);
  EXPECT_THROW(parse_double("", "t"), InvalidArgument);
}

TEST(FormatDouble, IgnoresLocale) {
  const char* prev = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = prev ? prev : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") == nullptr) GTEST_SKIP() << "de_DE locale unavailable";
  EXPECT_EQ(format_double(1.25), "1.25");
  EXPECT_EQ(parse_double("1.25", "t"), 1.25);
  std::setlocale(LC_NUMERIC, saved.c_str());
}

TEST(TraceCsv, RoundTripAndColumnOrder) {
  std::vector<MetricRow> trace;
  for (long k : {0L, 5L, 9L}) {
    MetricRow r;
    r.k = k;
    r.primal_value = 1.0 / double(k + 3);
    r.gap_sup = kNaN;
    r.kkt = std::exp(-double(k));
    r.cum_cost = 2.0 * double(k + 1);
    r.rounds = {k + 1, (k + 1) / 2};
    r.extra = {{"baseline_kkt", 0.5 * double(k)}};
    trace.push_back(r);
  }
  std::stringstream ss;
  write_trace_csv(ss, trace);
  const std::string text = ss.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "k,primal_value,gap_sup,violation,kkt,consensus_violation,cum_cost,wall_seconds,rounds_0,rounds_1,"
            "baseline_kkt");
  const CsvTable t = read_csv(ss);
  ASSERT_EQ(t.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(t.rows[i][t.column_index("k")], double(trace[i].k));
    EXPECT_EQ(t.rows[i][t.column_index("primal_value")], trace[i].primal_value);
    EXPECT_EQ(t.rows[i][t.column_index("kkt")], trace[i].kkt);
    EXPECT_TRUE(std::isnan(t.rows[i][t.column_index("gap_sup")]));
    EXPECT_EQ(t.rows[i][t.column_index("rounds_1")], double(trace[i].rounds[1]));
    EXPECT_EQ(t.rows[i][t.column_index("baseline_kkt")], trace[i].extra[0].second);
  }
  std::stringstream again;
  write_trace_csv(again, trace);
  EXPECT_EQ(again.str(), text);
  EXPECT_THROW(t.column_index("nope"), InvalidArgument);
}

TEST(TraceCsv, RejectsRaggedRows) {
  std::vector<MetricRow> trace(2);
  trace[0].rounds = {1};
  trace[1].rounds = {1, 2};
  std::stringstream ss;
  EXPECT_THROW(write_trace_csv(ss, trace), InvalidArgument);
}

TEST(ReadCsv, CellCountMismatchNamesLine) {
  std::stringstream ss("a,b\n1,2\n3\n");
  const std::string w = expect_invalid([&] { read_csv(ss); });
  EXPECT_NE(w.find("line 3"), std::string::npos) << w;
}

TEST(LedgerCsv, Layout) {
  MessageLedger ledger(2);
  ledger.record_message(0, 0, 3);
  ledger.record_message(0, 1, 3);
  ledger.complete_round(0, 0, 2, 6);
  ledger.close_iteration(1.5);
  ledger.close_iteration(0.0);
  std::stringstream ss;
  write_ledger_csv(ss, ledger);
  EXPECT_EQ(ss.str(), "iter,block,rounds,msgs,payload_scalars,iter_cost,cum_cost\n0,0,1,2,6,1.5,1.5\n");
}

TEST(KeyValue, ParsesCommentsAndWhitespace) {
  std::stringstream ss("# header\n N = 99 \nrates=1,2,3  # inline\n\nout = a b\n");
  const auto kv = parse_key_value(ss);
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv.at("N"), "99");
  EXPECT_EQ(kv.at("rates"), "1,2,3");
  EXPECT_EQ(kv.at("out"), "a b");
}

TEST(KeyValue, ErrorsCarryLineNumbers) {
  {
    std::stringstream ss("a=1\n\njunk\n");
    const std::string w = expect_invalid([&] { parse_key_value(ss); });
    EXPECT_NE(w.find("line 3"), std::string::npos) << w;
  }
  {
    std::stringstream ss("a=1\na=2\n");
    const std::string w = expect_invalid([&] { parse_key_value(ss); });
    EXPECT_NE(w.find("line 2"), std::string::npos) << w;
    EXPECT_NE(w.find("duplicate"), std::string::npos) << w;
  }
  {
    std::stringstream ss(" = 4\n");
    EXPECT_THROW(parse_key_value(ss), InvalidArgument);
  }
}

TEST(Libsvm, NormalizesRows) {
  std::stringstream ss("1 3:0.6 4:0.8\n-1 1:2\n");
  const SvmData d = libsvm_parse(ss, true);
  ASSERT_EQ(d.samples(), 2);
  ASSERT_EQ(d.dim(), 4);
  EXPECT_EQ(d.features.row(0).nonZeros(), 2);
  EXPECT_DOUBLE_EQ(d.features.coeff(0, 2), 0.6);
  EXPECT_DOUBLE_EQ(d.features.coeff(0, 3), 0.8);
  EXPECT_DOUBLE_EQ(d.features.coeff(1, 0), 1.0);
  EXPECT_EQ(d.labels[0], 1.0);
  EXPECT_EQ(d.labels[1], -1.0);
}

TEST(Libsvm, LabelConventions) {
  std::stringstream ss("0 1:1\n+1 2:1\n-1 1:1\n1 1:1\n");
  const SvmData d = libsvm_parse(ss, false, 5);
  EXPECT_EQ(d.dim(), 5);
  EXPECT_EQ(d.labels, (Vector(4) << -1, 1, -1, 1).finished());
  std::stringstream bad("2 1:1\n");
  EXPECT_THROW(libsvm_parse(bad, false), InvalidArgument);
}

TEST(Libsvm, MalformedLinesNameTheLine) {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"1 1:1\n1 2-3\n", "line 2"},
      {"1 1:1\n1 1:1\n-1 2:1 1:1\n", "line 3"},
      {"1 0:1\n", "line 1"},
      {"1 1:1\n1 2:nan\n", "line 2"},
      {"1 1:1\n1 2:abc\n", "line 2"},
  };
  for (const auto& [text, where] : cases) {
    std::stringstream ss(text);
    const std::string w = expect_invalid([&] { libsvm_parse(ss, false); });
    EXPECT_NE(w.find(where), std::string::npos) << text << " -> " << w;
  }
}

TEST(Libsvm, WriteLoadRoundTripIsExact) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  std::bernoulli_distribution keep(0.4);
  std::vector<Eigen::Triplet<double>> t;
  SvmData d;
  d.labels.resize(30);
  for (Index i = 0; i < 30; ++i) {
    d.labels[i] = keep(rng) ? 1.0 : -1.0;
    for (Index j = 0; j < 7; ++j)
      if (keep(rng)) t.emplace_back(i, j, u(rng));
  }
  d.features.resize(30, 7);
  d.features.setFromTriplets(t.begin(), t.end());
  const auto path = std::filesystem::temp_directory_path() / "mtpdhg_io_roundtrip" / "d.svm";
  libsvm_save(path, d);
  const SvmData back = libsvm_load(path, false, 7);
  EXPECT_EQ(back.labels, d.labels);
  EXPECT_EQ((Matrix(back.features) - Matrix(d.features)).cwiseAbs().maxCoeff(), 0.0);
  std::filesystem::remove_all(path.parent_path());
}

TEST(Json, NonFiniteBecomesNull) {
  const Json j = to_json({1.0, kNaN, INFINITY});
  EXPECT_EQ(j.dump(), "[1.0,null,null]");
  EXPECT_TRUE(finite_or_null(kNaN).is_null());
}
