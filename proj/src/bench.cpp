#include "taxi/bench.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <omp.h>

#include "taxi/llm/policy.hpp"
#include "taxi/llm/prompt.hpp"
#include "taxi/rng.hpp"
#include "taxi/simulate.hpp"

namespace taxi {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

PolicyFactory::PolicyFactory(const World& world, ExperimentConfig cfg) : world_(&world), cfg_(std::move(cfg)) {}

llm::ChatClientPtr PolicyFactory::chat_client(const std::string& model) const {
  if (client_) return client_;
  const auto& s = cfg_.llm;
  if (!s.mock_script.empty()) return llm::MockChatClient::from_file(s.mock_script);
  if (s.endpoint.empty()) {
    throw llm::ConfigError("LLM policy requested but no endpoint is configured (set llm.endpoint or llm.mock_script)");
  }
  if (model.empty()) throw llm::ConfigError("LLM policy requested but no model name is configured");
  llm::HttpClientOptions o;
  o.endpoint = s.endpoint;
  o.model = model;
  o.token_env = s.token_env;
  o.timeout = std::chrono::seconds(s.timeout_seconds);
  o.retries = s.retries;
  o.max_in_flight = s.max_in_flight;
  return std::make_shared<llm::HttpChatClient>(o);
}

RolloutConfig PolicyFactory::rollout_config(PolicyPtr base, LoadLevel load) const {
  RolloutConfig r;
  r.base = std::move(base);
  r.mc_samples = cfg_.mc_samples;
  r.t_h = cfg_.t_h;
  r.demand = DemandModel::uniform(world_->graph, cfg_.rate(load));
  return r;
}

PolicyPtr PolicyFactory::make(const std::string& name, LoadLevel load) const {
  if (name == "greedy") return std::make_shared<GreedyPolicy>();
  if (name == "ia-ra") return std::make_shared<IaRaPolicy>();
  if (name == "stay") return std::make_shared<StayPolicy>();
  if (name.starts_with("rollout:")) {
    auto base = make(name.substr(8), load);
    if (dynamic_cast<const llm::LlmJointPolicy*>(base.get())) base = external_policy(std::move(base));
    return std::make_shared<RolloutPolicy>(rollout_config(std::move(base), load));
  }
  const auto& s = cfg_.llm;
  llm::LlmConfig c;
  c.temperature = s.temperature;
  c.sc_temperature = s.sc_temperature;
  c.sc_samples = s.sc_samples;
  c.max_reprompts = s.max_reprompts;
  if (!s.semantic_context.empty()) c.semantic_context = s.semantic_context;
  c.endpoint = s.endpoint;
  if (name.starts_with("llm:")) {
    c.strategy = llm::parse_strategy(name.substr(4));
    c.model_name = s.model;
    return std::make_shared<llm::LlmJointPolicy>(c, chat_client(c.model_name), world_->graph);
  }
  if (name == "finetuned-llm") {
    c.strategy = llm::Strategy::zero_shot;
    c.model_name = s.finetuned_model;
    return std::make_shared<llm::LlmJointPolicy>(c, chat_client(c.model_name), world_->graph, "finetuned-llm");
  }
  throw std::invalid_argument(
      fmt::format("unknown policy '{}' (expected greedy, ia-ra, stay, llm:<strategy>, finetuned-llm or rollout:<base>)",
                  name));
}

std::uint64_t scenario_seed(std::uint64_t seed, LoadLevel load, std::size_t index) {
  return derive_seed(derive_seed(seed, 1 + static_cast<std::uint64_t>(load)), index);
}

std::vector<Scenario> build_test_set(LoadLevel load, std::size_t n, const World& world, const DemandModel& model,
                                     std::uint64_t seed, Step horizon, std::size_t agents,
                                     const std::string& map_id) {
  if (n < 1) throw std::invalid_argument("a test set needs at least one scenario");
  std::vector<Scenario> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(sample_scenario(model, world, horizon, agents, scenario_seed(seed, load, i), load, map_id));
  }
  return out;
}

std::vector<std::string> write_test_set(const std::string& dir, const std::vector<Scenario>& scenarios,
                                        const RoadGraph& g) {
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto folder = fs::path(dir) / std::string(to_string(scenarios[i].load));
    fs::create_directories(folder);
    const auto path = (folder / fmt::format("scenario_{:02}.json", i + 1)).string();
    std::ofstream out(path, std::ios::binary);
    out << save_scenario(scenarios[i], g);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path));
    paths.push_back(path);
  }
  return paths;
}

std::vector<Scenario> load_test_set(const std::string& dir, LoadLevel load, const World& world) {
  const auto folder = fs::path(dir) / std::string(to_string(load));
  if (!fs::is_directory(folder)) throw std::runtime_error(fmt::format("no test set at '{}'", folder.string()));
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(folder)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("scenario_") && name.ends_with(".json")) files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error(fmt::format("no scenario files in '{}'", folder.string()));
  std::vector<Scenario> out;
  for (const auto& f : files) out.push_back(load_scenario_file(f, world));
  return out;
}

std::uint64_t cell_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, index); }

std::vector<std::size_t> hardest_scenarios(const std::vector<Scenario>& scenarios, const World& world,
                                           std::size_t k, std::uint64_t seed) {
  std::vector<std::int64_t> cost(scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    cost[i] = simulate(scenarios[i], world, GreedyPolicy{}, cell_seed(seed, i), false).total_cost;
  }
  std::vector<std::size_t> idx(scenarios.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return cost[a] > cost[b]; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

void summarise(PolicyRow& row) {
  std::int64_t sum = 0;
  std::size_t n = 0, hall = 0;
  for (std::size_t i = 0; i < row.costs.size(); ++i) {
    if (!row.costs[i]) continue;
    sum += *row.costs[i];
    hall += row.hallucinations[i];
    ++n;
  }
  row.partial = n < row.costs.size();
  if (n == 0) {
    row.mean_cost = row.std_cost = row.mean_hallucinations = 0.0;
    return;
  }
  row.mean_cost = static_cast<double>(sum) / static_cast<double>(n);
  row.mean_hallucinations = static_cast<double>(hall) / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& c : row.costs) {
    if (c) ss += (static_cast<double>(*c) - row.mean_cost) * (static_cast<double>(*c) - row.mean_cost);
  }
  row.std_cost = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
}

BenchReport run_benchmark(const std::vector<PolicyPtr>& policies, const std::vector<Scenario>& scenarios,
                          const World& world, const BenchOptions& opts) {
  if (scenarios.empty()) throw std::invalid_argument("benchmark needs at least one scenario");
  if (policies.empty()) throw std::invalid_argument("benchmark needs at least one policy");
  const auto n = scenarios.size();
  BenchReport report;
  report.map_id = scenarios.front().map_id;
  report.load = scenarios.front().load;
  report.horizon = scenarios.front().horizon;
  report.seed = opts.seed;
  report.mc_samples = opts.mc_samples;
  report.t_h = opts.t_h;
  for (const auto& sc : scenarios) report.scenario_seeds.push_back(sc.seed);

  std::vector<std::string> errors(policies.size() * n);
  for (const auto& p : policies) {
    PolicyRow row;
    row.policy = p->name();
    row.version = row.policy.starts_with("rollout:") ? "Rollout" : "Base";
    row.costs.assign(n, std::nullopt);
    row.hallucinations.assign(n, 0);
    report.rows.push_back(std::move(row));
  }

  const auto cells = static_cast<std::int64_t>(policies.size() * n);
  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::int64_t t = 0; t < cells; ++t) {
    const auto p = static_cast<std::size_t>(t) / n;
    const auto i = static_cast<std::size_t>(t) % n;
    try {
      const auto r = simulate(scenarios[i], world, *policies[p], cell_seed(opts.seed, i), false);
      report.rows[p].costs[i] = r.total_cost;
      report.rows[p].hallucinations[i] = r.hallucinations;
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(t)] = e.what();
    }
  }

  for (std::size_t p = 0; p < policies.size(); ++p) {
    auto& row = report.rows[p];
    for (std::size_t i = 0; i < n; ++i) {
      if (!row.costs[i]) row.failures.push_back(fmt::format("scenario {}: {}", i + 1, errors[p * n + i]));
    }
    summarise(row);
  }
  return report;
}

std::string report_json(const BenchReport& r) {
  ojson doc;
  auto& meta = doc["metadata"];
  meta["map_id"] = r.map_id;
  meta["load"] = std::string(to_string(r.load));
  meta["horizon"] = r.horizon;
  meta["seed"] = r.seed;
  meta["mc_samples"] = r.mc_samples;
  meta["t_h"] = r.t_h;
  meta["scenarios"] = r.scenario_seeds.size();
  meta["scenario_seeds"] = r.scenario_seeds;
  auto& rows = doc["rows"] = ojson::array();
  for (const auto& row : r.rows) {
    ojson j;
    j["policy"] = row.policy;
    j["version"] = row.version;
    j["mean_cost"] = row.mean_cost;
    j["std_cost"] = row.std_cost;
    j["mean_hallucinations"] = row.mean_hallucinations;
    j["partial"] = row.partial;
    auto& costs = j["costs"] = ojson::array();
    for (const auto& c : row.costs) costs.push_back(c ? ojson(*c) : ojson(nullptr));
    j["hallucinations"] = row.hallucinations;
    j["failures"] = row.failures;
    rows.push_back(std::move(j));
  }
  return doc.dump(1) + "\n";
}

std::string report_csv(const BenchReport& r) {
  std::string out = "policy,version,scenario,scenario_seed,cost,hallucinations\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.costs.size(); ++i) {
      out += fmt::format("{},{},{},{},{},{}\n", row.policy, row.version, i + 1, r.scenario_seeds[i],
                         row.costs[i] ? std::to_string(*row.costs[i]) : std::string(), row.hallucinations[i]);
    }
  }
  return out;
}

std::string report_table(const BenchReport& r) {
  std::string out = fmt::format("load: {}  scenarios: {}  horizon: {}\n", to_string(r.load), r.scenario_seeds.size(),
                                r.horizon);
  out += fmt::format("{:<22} {:<8} {:>20} {:>15}\n", "Method", "Version", "Cost (mean +/- std)", "Hallucinations");
  for (const auto& row : r.rows) {
    const auto method = row.version == "Rollout" ? row.policy.substr(8) : row.policy;
    out += fmt::format("{:<22} {:<8} {:>20} {:>15.2f}{}\n", method, row.version,
                       fmt::format("{:.2f} +/- {:.2f}", row.mean_cost, row.std_cost), row.mean_hallucinations,
                       row.partial ? "  (partial)" : "");
  }
  return out;
}

std::vector<McPoint> mc_sweep(const PolicyPtr& base, const std::vector<Scenario>& scenarios, const World& world,
                              const RolloutConfig& proto, const std::vector<std::size_t>& mc_list,
                              const BenchOptions& opts) {
  if (mc_list.empty()) throw std::invalid_argument("mc sweep needs at least one sample count");
  if (!std::is_sorted(mc_list.begin(), mc_list.end())) throw std::invalid_argument("mc list must be ascending");
  std::vector<McPoint> curve;
  for (const auto mc : mc_list) {
    auto cfg = proto;
    cfg.base = base;
    cfg.mc_samples = mc;
    const std::vector<PolicyPtr> policies{std::make_shared<RolloutPolicy>(cfg)};
    auto local = opts;
    local.mc_samples = mc;
    const auto report = run_benchmark(policies, scenarios, world, local);
    const auto& row = report.rows.front();
    if (row.partial) throw std::runtime_error(fmt::format("mc sweep run at {} samples failed: {}", mc, row.failures.front()));
    McPoint p{mc, row.mean_cost, row.std_cost, {}};
    for (const auto& c : row.costs) p.costs.push_back(*c);
    curve.push_back(std::move(p));
  }
  return curve;
}

std::string curve_csv(const std::vector<McPoint>& curve) {
  std::string out = "mc_samples,mean_cost,std_cost\n";
  for (const auto& p : curve) out += fmt::format("{},{:.6f},{:.6f}\n", p.mc_samples, p.mean_cost, p.std_cost);
  return out;
}

std::string curve_svg(const std::vector<McPoint>& curve, const std::string& title) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 60;
  double lo = curve.front().mean_cost, hi = lo;
  for (const auto& p : curve) {
    lo = std::min(lo, p.mean_cost - p.std_cost);
    hi = std::max(hi, p.mean_cost + p.std_cost);
  }
  if (hi - lo < 1e-9) {
    lo -= 1;
    hi += 1;
  }
  const double pad = 0.05 * (hi - lo);
  lo = std::max(0.0, lo - pad);
  hi += pad;
  const double x0 = std::log10(static_cast<double>(std::max<std::size_t>(1, curve.front().mc_samples)));
  double x1 = std::log10(static_cast<double>(std::max<std::size_t>(1, curve.back().mc_samples)));
  if (x1 - x0 < 1e-9) x1 = x0 + 1;
  const auto px = [&](std::size_t mc) {
    return L + (std::log10(static_cast<double>(std::max<std::size_t>(1, mc))) - x0) / (x1 - x0) * (W - L - R);
  };
  const auto py = [&](double c) { return T + (hi - c) / (hi - lo) * (H - T - B); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
      W, H, W / 2, title);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", L, H - B, W - R);
  svg += fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", L, T, H - B);
  for (int i = 0; i <= 4; ++i) {
    const double c = lo + (hi - lo) * i / 4.0;
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">{:.1f}</text>\n", L - 6, py(c) + 4, c);
  }
  std::string points;
  for (const auto& p : curve) {
    const double x = px(p.mc_samples);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", x, H - B + 18,
                       p.mc_samples);
    svg += fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"#888\"/>\n", x,
                       py(p.mean_cost - p.std_cost), py(p.mean_cost + p.std_cost));
    svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"#1f77b4\"/>\n", x, py(p.mean_cost));
    points += fmt::format("{:.1f},{:.1f} ", x, py(p.mean_cost));
  }
  svg += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n", points);
  svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">MC futures sampled</text>\n", (L + W - R) / 2,
                     H - 16);
  svg += fmt::format(
      "<text x=\"16\" y=\"{0}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0})\">Cost (total waiting "
      "time)</text>\n</svg>\n",
      (T + H - B) / 2);
  return svg;
}

std::size_t export_finetune_data(const std::vector<Scenario>& scenarios, const RolloutConfig& cfg,
                                 const World& world, std::uint64_t seed, std::ostream& out,
                                 const std::optional<std::string>& semantic_context) {
  const auto system = llm::build_system_prompt(world.graph, semantic_context).content;
  std::size_t records = 0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& sc = scenarios[i];
    const auto sim_seed = cell_seed(seed, i);
    auto s = initial_state(sc);
    for (Step k = 0; k + 1 < sc.horizon; ++k) {
      const auto d = rollout_decide(s, cfg, world, decision_seed(sim_seed, k));
      for (const auto& table : d.tables) {
        if (table.forced) continue;
        const auto l = table.agent;
        const std::span<const AgentAction> actions(d.actions), base(d.base_actions);
        const auto user = llm::build_user_prompt(s, world, l, actions.subspan(0, l), base.subspan(l + 1));
        ojson rec;
        rec["messages"] = ojson::array({{{"role", "system"}, {"content", system}},
                                        {{"role", "user"}, {"content", user.content}},
                                        {{"role", "assistant"}, {"content", llm::render_reply(d.actions[l], world.graph)}}});
        rec["provenance"] = {{"scenario", i}, {"scenario_seed", sc.seed}, {"sim_seed", sim_seed}, {"step", k},
                             {"agent", l}};
        out << rec.dump() << '\n';
        ++records;
      }
      apply_step(s, d.actions, arrivals_at(sc, k + 1), world);
    }
  }
  if (!out) throw std::runtime_error("failed writing fine-tune records");
  return records;
}

std::vector<FinetuneRecord> read_finetune_data(std::istream& in) {
  std::vector<FinetuneRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    FinetuneRecord r;
    const auto& m = j.at("messages");
    r.system = m.at(0).at("content").get<std::string>();
    r.user = m.at(1).at("content").get<std::string>();
    r.assistant = m.at(2).at("content").get<std::string>();
    const auto& p = j.at("provenance");
    r.provenance = {p.at("scenario").get<std::size_t>(), p.at("scenario_seed").get<std::uint64_t>(),
                    p.at("sim_seed").get<std::uint64_t>(), p.at("step").get<Step>(), p.at("agent").get<AgentIndex>()};
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace taxi
