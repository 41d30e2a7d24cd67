// Apache License, Version 2.0, refer to LICENSE.txt

#include <doctest.h>

#include <sstream>

#include "support/synthetic.hh"
#include "topika/model_io.hh"
#include "topika/training.hh"

using namespace topika;

TEST_CASE("model dump round trips bit for bit") {
  const auto synth = testing::make_lda_corpus(12, 9, 3, 15, 0.3, 0.2, 4);
  TrainConfig cfg;
  cfg.algorithm = Algorithm::kCVB0;
  cfg.K = 3;
  cfg.max_iterations = 15;
  const TrainResult r = train(synth.corpus, nullptr, cfg);
  const ModelDump dump = make_dump(r.counts, r.h, cfg.algorithm, Estimator::kCollapsed, r.iterations, 77);

  std::stringstream buf;
  write_model(buf, dump);
  const ModelDump back = read_model(buf);
  CHECK(back.W == 9);
  CHECK(back.K == 3);
  CHECK(back.D == 12);
  CHECK(back.alpha == dump.alpha);
  CHECK(back.seed == 77);
  CHECK(back.algorithm == Algorithm::kCVB0);
  CHECK(back.phi == dump.phi);
  CHECK(back.theta == dump.theta);
  REQUIRE(back.word_topic_counts.has_value());
  CHECK(*back.word_topic_counts == r.counts.n_wk);

  std::stringstream again;
  write_model(again, back);
  CHECK(again.str() == buf.str());
}

TEST_CASE("model dump without counts") {
  ModelDump m;
  m.W = 2;
  m.K = 1;
  m.D = 1;
  m.alpha = m.eta = 0.5;
  m.phi = Matrix(2, 1, 0.5);
  m.theta = Matrix(1, 1, 1.0);
  std::stringstream buf;
  write_model(buf, m);
  const ModelDump back = read_model(buf);
  CHECK_FALSE(back.word_topic_counts.has_value());
  CHECK_FALSE(back.counts().has_value());
}

TEST_CASE("malformed dumps name the line") {
  std::istringstream in("topika-model 1\nW 2\nK x\n");
  try {
    read_model(in);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::istringstream wrong("something else\n");
  CHECK_THROWS(read_model(wrong));
}

TEST_CASE("top words per topic") {
  Matrix phi(3, 2);
  phi(0, 0) = 0.2, phi(1, 0) = 0.5, phi(2, 0) = 0.3;
  phi(0, 1) = 0.6, phi(1, 1) = 0.1, phi(2, 1) = 0.3;
  std::ostringstream out;
  write_top_words(out, phi, {"a", "b", "c"}, 2);
  CHECK(out.str() == "topic,rank,word,probability\n0,1,b,0.5\n0,2,c,0.3\n1,1,a,0.6\n1,2,c,0.3\n");
}
