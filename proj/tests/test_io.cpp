#include <doctest.h>

#include <chrono>
#include <sstream>

#include "efflob/config.hpp"
#include "efflob/error.hpp"
#include "efflob/real_data.hpp"
#include "efflob/sim.hpp"

using namespace efflob;

namespace {

std::string dump(const EventLog& log) {
  std::ostringstream os;
  write_log(os, log);
  return os.str();
}

std::string exported(const EventLog& log) {
  std::ostringstream os;
  export_real_log(os, log);
  return os.str();
}

EventLog ingest(const std::string& text, const Units& u = {}) {
  std::istringstream in(text);
  return ingest_real_log(in, u);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Io;
}

const char* kSmall =
    "{\"type\":\"header\",\"format_version\":1,\"assets\":[\"A\",\"B\"],\"ticks\":[1,0.5],\"T\":\"100\","
    "\"p0\":[10000.5,20000.25],\"imbalance0\":[0.1,-0.2]}\n"
    "{\"t\":\"1.5\",\"asset\":null,\"dir\":\"state\",\"imbalance\":[0.3,-0.2],\"p\":[10000.5,20000.25]}\n"
    "{\"t\":\"2.25\",\"asset\":0,\"dir\":\"+\",\"imbalance\":[-0.5,-0.2],\"p\":[10001.5,20000.25]}\n"
    "{\"t\":\"3\",\"asset\":1,\"dir\":\"-\",\"imbalance\":[-0.5,0.9],\"p\":[10001.5,19999.75]}\n";

}  // namespace

TEST_CASE("config values and schema enforcement") {
  const auto c = parse_config(
      "[run]\npreset = model2\nseed = 17\n[sim]\nhorizon = 250 ; seconds\nscheme = thinning\n"
      "[theta]\nrho = 0.3\n[scaling]\nn_list = 1, 2, 8\n");
  CHECK(c.preset == "model2");
  CHECK(c.seed == 17);
  CHECK(c.sim.seed == 17);
  CHECK(c.impact.seed == 17);
  CHECK(c.sim.horizon == 250);
  CHECK(c.sim.scheme == Scheme::Thinning);
  CHECK(c.theta.at("rho") == 0.3);
  CHECK(c.scaling.n_list == std::vector<int>{1, 2, 8});

  CHECK(code_of([] { parse_config("[sim]\nhorizn = 3\n"); }) == ErrorCode::Schema);
  CHECK(code_of([] { parse_config("[simulation]\nhorizon = 3\n"); }) == ErrorCode::Schema);
  CHECK(code_of([] { parse_config("[theta]\nrho = 0.3\n"); }) == ErrorCode::Schema);  // model1 has no rho
  CHECK(code_of([] { parse_config("[sim]\nhorizon = abc\n"); }) == ErrorCode::Schema);
  CHECK(code_of([] { parse_config("[run]\npreset = nope\n"); }) == ErrorCode::Schema);
  CHECK(code_of([] { parse_config("[sim]\ndt = -1\n"); }) == ErrorCode::Schema);
}

TEST_CASE("shipped config files parse") {
  for (const char* f : {"schema.ini", "model1.cfg", "model2.cfg", "imbalance.cfg", "scaling.cfg", "lyapunov.cfg",
                        "impact.cfg", "liquidation.cfg"})
    CHECK_NOTHROW(load_config(std::string(EFFLOB_SOURCE_DIR) + "/config/" + f));
  // the schema file spells out the defaults
  const auto s = load_config(std::string(EFFLOB_SOURCE_DIR) + "/config/schema.ini");
  CHECK(s.to_json().dump() == default_run_config("model1").to_json().dump());
}

TEST_CASE("resolved config serializes deterministically") {
  auto c = parse_config("[run]\nseed = 3\n");
  CHECK(c.to_json().dump() == parse_config("[run]\nseed = 3\n").to_json().dump());
  apply_seed(c, 4);
  CHECK(c.to_json()["run"]["seed"] == 4);
  CHECK(config_schema().find("[liquidation]") != std::string::npos);
}

TEST_CASE("volume imbalance") {
  CHECK(volume_imbalance(3, 1) == 0.5);
  CHECK(volume_imbalance(0, 4) == -1.0);
  CHECK(volume_imbalance(0, 0) == 0.0);
}

TEST_CASE("market-data log ingestion") {
  const auto log = ingest(kSmall);
  CHECK(log.header.preset == "imbalance");
  REQUIRE(log.records.size() == 3);
  const auto m = model_from_header(log.header);
  CHECK(log.records[0].z == -1);
  CHECK(log.records[1].z == m->event_index("s1+"));
  CHECK(log.records[2].z == m->event_index("s2-"));
  CHECK(log.records[1].t == 2.25);
  CHECK(m->price(log.records[2].x, 1) == 19999.75);
  CHECK_NOTHROW(check_log(log, *m));

  // units: minutes and cents
  const auto scaled = ingest(kSmall, Units{60.0, 0.01});
  CHECK(scaled.records[1].t == 135.0);
  CHECK(scaled.header.horizon == 6000.0);
  CHECK(scaled.header.ticks[0] == 0.01);
  CHECK(model_from_header(scaled.header)->price(scaled.records[1].x, 0) == doctest::Approx(100.015));
}

TEST_CASE("market-data logs are validated") {
  auto with = [](const std::string& from, const std::string& to) {
    std::string s = kSmall;
    const auto p = s.find(from);
    REQUIRE(p != std::string::npos);
    return s.replace(p, from.size(), to);
  };
  CHECK(code_of([&] { ingest(with("[-0.5,0.9]", "[-0.5,1.2]")); }) == ErrorCode::Validation);
  CHECK(code_of([&] { ingest(with("\"t\":\"3\"", "\"t\":\"2\"")); }) == ErrorCode::Validation);
  CHECK(code_of([&] { ingest(with("\"dir\":\"+\"", "\"dir\":\"-\"")); }) == ErrorCode::Validation);
  CHECK(code_of([&] { ingest(with("\"dir\":\"state\"", "\"dir\":\"up\"")); }) == ErrorCode::Schema);
  CHECK(code_of([&] { ingest(with("[10001.5,20000.25]}", "[10002.5,20000.25]}")); }) == ErrorCode::Validation);
  CHECK(code_of([&] { ingest(with("10000.5,20000.25]}\n{\"t\":\"2.25", "10000.7,20000.25]}\n{\"t\":\"2.25")); }) ==
        ErrorCode::Validation);
  try {
    ingest(with("[-0.5,0.9]", "[-0.5,1.2]"));
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 4") != std::string::npos);
  }
}

TEST_CASE("simulated signal logs round-trip through the market-data layout") {
  for (const char* p : {"model2", "imbalance"}) {
    SimConfig cfg;
    cfg.horizon = 100;
    cfg.seed = 2;
    cfg.record_outcomes = false;
    const auto log = simulate(make_model(p, default_theta(p)), cfg);
    const auto text = exported(log);
    const auto back = ingest(text);
    REQUIRE(back.records.size() == log.records.size());
    for (std::size_t i = 0; i < log.records.size(); ++i) {
      CHECK(back.records[i].t == log.records[i].t);
      CHECK(back.records[i].z == log.records[i].z);
      CHECK(back.records[i].x == log.records[i].x);
    }
    CHECK(back.header.x0 == log.header.x0);
    CHECK(back.header.horizon == log.header.horizon);
    CHECK(exported(back) == text);
  }
}

TEST_CASE("a day-sized two-asset log ingests quickly") {
  SimConfig cfg;
  cfg.horizon = 1500;
  cfg.record_outcomes = false;
  const auto log = simulate(make_model("imbalance", default_theta("imbalance")), cfg);
  const auto text = exported(log);
  MESSAGE(log.records.size(), " records");
  CHECK(log.records.size() > 8000);
  const auto t0 = std::chrono::steady_clock::now();
  const auto back = ingest(text);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(back.records.size() == log.records.size());
  CHECK(s < 1.0);
}
