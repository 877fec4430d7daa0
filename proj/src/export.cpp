#include "riskplan/export.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace riskplan {
namespace {

using Json = nlohmann::ordered_json;

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json metrics_json(const EpisodeMetrics& m) {
  return Json{{"completion_time", m.completion_time}, {"avg_speed", m.avg_speed},
              {"rms_acc", m.rms_acc},                 {"max_abs_acc", m.max_abs_acc},
              {"min_distance", finite_or_null(m.min_distance)},
              {"max_decel", m.max_decel},             {"success", m.success}};
}

std::string fmt(double v, int digits = 4) {
  if (!std::isfinite(v)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string metrics_to_json(const EpisodeMetrics& m) { return metrics_json(m).dump(2); }

std::string trace_to_json(const Trace& trace) {
  Json j;
  j["schema_version"] = trace.schema_version;
  j["world"] = trace.world;
  j["mode"] = trace.mode;
  j["seed"] = trace.seed;
  j["control_dt"] = trace.control_dt;
  j["outcome"] = to_string(trace.outcome);
  j["ego_shape"] = {{"half_length", trace.ego_shape.half_length}, {"half_width", trace.ego_shape.half_width}};
  j["agent_shapes"] = Json::array();
  for (const auto& [id, s] : trace.agent_shapes) {
    j["agent_shapes"].push_back({{"id", id}, {"half_length", s.half_length}, {"half_width", s.half_width}});
  }
  j["steps"] = Json::array();
  for (const auto& s : trace.steps) {
    Json step{{"t", s.t},
              {"ego", {{"x", s.ego.x}, {"y", s.ego.y}, {"theta", s.ego.theta}, {"v", s.ego.v}, {"a", s.ego.a},
                       {"delta", s.ego.delta}}},
              {"control", {{"jerk", s.control.jerk}, {"steer_rate", s.control.steer_rate}}},
              {"policy_id", s.policy_id},
              {"policy", s.policy},
              {"branch", s.branch},
              {"degraded", s.degraded},
              {"replanned", s.replanned},
              {"agents", Json::array()}};
    for (const auto& a : s.agents) {
      step["agents"].push_back(
          {{"id", a.id}, {"x", a.state.x}, {"y", a.state.y}, {"heading", a.state.heading}, {"speed", a.state.speed}});
    }
    j["steps"].push_back(std::move(step));
  }
  j["plans"] = Json::array();
  for (const auto& p : trace.plans) {
    Json plan{{"t", p.t},
              {"policy_id", p.policy_id},
              {"policy", p.policy},
              {"degraded", p.degraded},
              {"branch_step", p.branch_step},
              {"probabilities", p.probabilities},
              {"risk_weights", p.risk_weights},
              {"branch_safety", p.branch_safety},
              {"rewards", p.rewards},
              {"branches", Json::array()}};
    for (const auto& b : p.branches) {
      Json pts = Json::array();
      for (const auto& q : b) pts.push_back({q.x, q.y});
      plan["branches"].push_back(std::move(pts));
    }
    j["plans"].push_back(std::move(plan));
  }
  j["metrics"] = metrics_json(metrics_from_trace(trace));
  return j.dump(1) + "\n";
}

Trace trace_from_json(const std::string& text) {
  Trace t;
  try {
    const Json j = Json::parse(text);
    t.schema_version = j.at("schema_version").get<int>();
    if (t.schema_version != kTraceSchemaVersion) {
      throw std::invalid_argument("unsupported trace schema_version " + std::to_string(t.schema_version));
    }
    t.world = j.value("world", "");
    t.mode = j.value("mode", "");
    t.seed = j.value("seed", std::uint64_t{0});
    t.control_dt = j.value("control_dt", 0.05);
    t.outcome = episode_outcome_from_string(j.value("outcome", "running"));
    const auto& es = j.at("ego_shape");
    t.ego_shape = {es.at("half_length").get<double>(), es.at("half_width").get<double>()};
    for (const auto& s : j.value("agent_shapes", Json::array())) {
      t.agent_shapes[s.at("id").get<int>()] = {s.at("half_length").get<double>(), s.at("half_width").get<double>()};
    }
    for (const auto& s : j.at("steps")) {
      TraceStep step;
      step.t = s.at("t").get<double>();
      const auto& e = s.at("ego");
      step.ego = {e.at("x").get<double>(), e.at("y").get<double>(), e.at("theta").get<double>(),
                  e.at("v").get<double>(), e.at("a").get<double>(), e.at("delta").get<double>()};
      step.control = {s.at("control").at("jerk").get<double>(), s.at("control").at("steer_rate").get<double>()};
      step.policy_id = s.value("policy_id", -1);
      step.policy = s.value("policy", "");
      step.branch = s.value("branch", -1);
      step.degraded = s.value("degraded", false);
      step.replanned = s.value("replanned", false);
      for (const auto& a : s.value("agents", Json::array())) {
        step.agents.push_back({a.at("id").get<int>(),
                               {a.at("x").get<double>(), a.at("y").get<double>(), a.at("heading").get<double>(),
                                a.at("speed").get<double>()}});
      }
      t.steps.push_back(std::move(step));
    }
    for (const auto& p : j.value("plans", Json::array())) {
      PlanRecord rec;
      rec.t = p.at("t").get<double>();
      rec.policy_id = p.value("policy_id", -1);
      rec.policy = p.value("policy", "");
      rec.degraded = p.value("degraded", false);
      rec.branch_step = p.value("branch_step", 0);
      rec.probabilities = p.value("probabilities", std::vector<double>{});
      rec.risk_weights = p.value("risk_weights", std::vector<double>{});
      rec.branch_safety = p.value("branch_safety", std::vector<double>{});
      rec.rewards = p.value("rewards", std::map<std::string, double>{});
      for (const auto& b : p.value("branches", Json::array())) {
        std::vector<Point2> pts;
        for (const auto& q : b) pts.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
        rec.branches.push_back(std::move(pts));
      }
      t.plans.push_back(std::move(rec));
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("malformed trace: ") + e.what());
  }
  return t;
}

std::string comparison_csv(const std::vector<NamedMetrics>& rows) {
  std::ostringstream out;
  out << "Methods,Time (s),Avg Spd (m/s),RMS Acc (m/s^2),Max Abs Acc (m/s^2)\n";
  for (const auto& r : rows) {
    out << r.method << ',' << fmt(r.metrics.completion_time, 2) << ',' << fmt(r.metrics.avg_speed, 2) << ','
        << fmt(r.metrics.rms_acc, 2) << ',' << fmt(r.metrics.max_abs_acc, 2) << '\n';
  }
  return out.str();
}

std::string ablation_label(BranchMode mode) {
  switch (mode) {
    case BranchMode::NoBranch: return "w/o branch";
    case BranchMode::FixedBranch: return "Fixed branch";
    case BranchMode::DynamicBranch: return "Dyna branch";
    case BranchMode::DynamicBranchRisk: return "Dyna branch + Risk";
  }
  return "?";
}

std::string ablation_csv(const std::vector<BatchResult>& batches) {
  std::ostringstream out;
  out << "Methods,Avg Max Dec (m/s^2),Avg Min Dis (m),Suc Rate (%)\n";
  for (const auto& b : batches) {
    out << ablation_label(b.mode) << ',' << fmt(b.mean_max_decel, 2) << ',' << fmt(b.mean_min_distance, 2) << ','
        << fmt(100.0 * b.success_rate, 0) << '\n';
  }
  return out.str();
}

std::string episodes_csv(const BatchResult& batch) {
  std::ostringstream out;
  out << "episode,seed,mode,time_s,avg_speed_mps,rms_acc_mps2,max_abs_acc_mps2,max_decel_mps2,min_distance_m,success\n";
  for (const auto& r : batch.rows) {
    const auto& m = r.metrics;
    out << r.episode << ',' << r.seed << ',' << to_string(batch.mode) << ',' << fmt(m.completion_time) << ','
        << fmt(m.avg_speed) << ',' << fmt(m.rms_acc) << ',' << fmt(m.max_abs_acc) << ',' << fmt(m.max_decel) << ','
        << fmt(m.min_distance) << ',' << (m.success ? 1 : 0) << '\n';
  }
  return out.str();
}

namespace {

struct Panel {
  double x0, y0, w, h;  // pixel frame
  double lo_x, hi_x, lo_y, hi_y;

  double px(double v) const { return x0 + (v - lo_x) / (hi_x - lo_x) * w; }
  double py(double v) const { return y0 + h - (v - lo_y) / (hi_y - lo_y) * h; }
};

Panel fit(double x0, double y0, double w, double h, double lo_x, double hi_x, double lo_y, double hi_y) {
  if (hi_x - lo_x < 1e-9) hi_x = lo_x + 1.0;
  if (hi_y - lo_y < 1e-9) {
    lo_y -= 0.5;
    hi_y += 0.5;
  }
  return {x0, y0, w, h, lo_x, hi_x, lo_y, hi_y};
}

void frame(std::ostringstream& out, const Panel& p, const std::string& title) {
  out << "<rect x=\"" << fmt(p.x0, 1) << "\" y=\"" << fmt(p.y0, 1) << "\" width=\"" << fmt(p.w, 1) << "\" height=\""
      << fmt(p.h, 1) << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<text x=\"" << fmt(p.x0, 1) << "\" y=\"" << fmt(p.y0 - 6, 1) << "\" font-size=\"13\">" << title << " ["
      << fmt(p.lo_y, 2) << ", " << fmt(p.hi_y, 2) << "]</text>\n";
}

void line(std::ostringstream& out, const Panel& p, const std::vector<Point2>& pts, const std::string& colour,
          double width, double opacity = 1.0) {
  if (pts.size() < 2) return;
  out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"" << fmt(width, 1)
      << "\" stroke-opacity=\"" << fmt(opacity, 2) << "\" points=\"";
  for (const auto& q : pts) out << fmt(p.px(q.x), 1) << ',' << fmt(p.py(q.y), 1) << ' ';
  out << "\"/>\n";
}

}  // namespace

std::string trace_svg(const Trace& trace) {
  std::ostringstream out;
  const double W = 900, H = 760;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"20\" y=\"22\" font-size=\"15\">" << trace.world << " / " << trace.mode << " / seed "
      << trace.seed << " / " << to_string(trace.outcome) << "</text>\n";
  if (trace.steps.empty()) {
    out << "</svg>\n";
    return out.str();
  }

  std::vector<Point2> speed, acc, path;
  double v_max = 0.0, a_lo = 0.0, a_hi = 0.0;
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  auto grow = [&](const Point2& q) {
    x_lo = std::min(x_lo, q.x);
    x_hi = std::max(x_hi, q.x);
    y_lo = std::min(y_lo, q.y);
    y_hi = std::max(y_hi, q.y);
  };
  for (const auto& s : trace.steps) {
    speed.push_back({s.t, s.ego.v});
    acc.push_back({s.t, s.ego.a});
    path.push_back({s.ego.x, s.ego.y});
    v_max = std::max(v_max, s.ego.v);
    a_lo = std::min(a_lo, s.ego.a);
    a_hi = std::max(a_hi, s.ego.a);
    grow(path.back());
  }
  const double t_end = trace.steps.back().t;

  const Panel pv = fit(60, 50, 800, 180, 0.0, t_end, 0.0, v_max * 1.1);
  frame(out, pv, "speed (m/s) vs time (s)");
  line(out, pv, speed, "#1f77b4", 2);
  const Panel pa = fit(60, 280, 800, 180, 0.0, t_end, a_lo * 1.1, a_hi * 1.1);
  frame(out, pa, "acceleration (m/s^2) vs time (s)");
  line(out, pa, {{0.0, 0.0}, {t_end, 0.0}}, "#bbb", 1);
  line(out, pa, acc, "#d62728", 2);

  // Agents and plans share the path frame; keep the aspect ratio honest.
  std::map<AgentId, std::vector<Point2>> agent_paths;
  for (const auto& s : trace.steps) {
    for (const auto& a : s.agents) {
      agent_paths[a.id].push_back(a.state.position());
      grow(a.state.position());
    }
  }
  const double span = std::max({x_hi - x_lo, (y_hi - y_lo) * 800.0 / 220.0, 1.0});
  const double yc = 0.5 * (y_lo + y_hi);
  const double half_y = span * 220.0 / 800.0 / 2.0;
  const Panel pt = fit(60, 510, 800, 220, x_lo, x_lo + span, yc - half_y, yc + half_y);
  frame(out, pt, "executed path (blue), planned branches (grey), agents (orange); y range m");
  for (std::size_t i = 0; i < trace.plans.size(); i += 5) {
    for (const auto& b : trace.plans[i].branches) line(out, pt, b, "#555", 1, 0.35);
  }
  for (const auto& [id, pts] : agent_paths) line(out, pt, pts, "#ff7f0e", 2);
  line(out, pt, path, "#1f77b4", 2);
  out << "</svg>\n";
  return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace riskplan
