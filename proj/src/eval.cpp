// Parsing metrics (UAS/LAS, per-POS and per-distance labeled F) and the
// lambda-sweep / ablation experiment drivers.

#include "codemix/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "codemix/error.hpp"

namespace codemix {

namespace {

void check_aligned(const Treebank& gold, const Treebank& pred) {
  if (gold.trees.size() != pred.trees.size()) {
    throw DataError("treebank size mismatch: gold has " + std::to_string(gold.trees.size()) +
                    " sentences, prediction has " + std::to_string(pred.trees.size()));
  }
  for (std::size_t s = 0; s < gold.trees.size(); ++s) {
    if (gold.trees[s].size() != pred.trees[s].size()) {
      throw DataError("sentence " + gold.trees[s].sent_id + ": gold has " +
                      std::to_string(gold.trees[s].size()) + " tokens, prediction has " +
                      std::to_string(pred.trees[s].size()));
    }
  }
}

bool is_punct(const Token& tok) { return tok.upos == "PUNCT"; }

std::string format2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

}  // namespace

MetricsReport score(const Treebank& gold, const Treebank& pred) {
  check_aligned(gold, pred);
  MetricsReport report;
  long long uas_correct = 0, las_correct = 0;
  for (std::size_t s = 0; s < gold.trees.size(); ++s) {
    const DependencyTree& g = gold.trees[s];
    const DependencyTree& p = pred.trees[s];
    for (int i = 1; i <= g.size(); ++i) {
      if (is_punct(g.at(i))) {
        ++report.excluded;
        continue;
      }
      ++report.evaluated;
      if (p.at(i).head == g.at(i).head) {
        ++uas_correct;
        if (p.at(i).deprel == g.at(i).deprel) ++las_correct;
      }
    }
  }
  if (report.evaluated > 0) {
    report.uas = 100.0 * static_cast<double>(uas_correct) / static_cast<double>(report.evaluated);
    report.las = 100.0 * static_cast<double>(las_correct) / static_cast<double>(report.evaluated);
  }
  return report;
}

std::map<std::string, double> f_by_pos(const Treebank& gold, const Treebank& pred) {
  check_aligned(gold, pred);
  std::map<std::string, long long> total, correct;
  for (std::size_t s = 0; s < gold.trees.size(); ++s) {
    const DependencyTree& g = gold.trees[s];
    const DependencyTree& p = pred.trees[s];
    for (int i = 1; i <= g.size(); ++i) {
      if (is_punct(g.at(i))) continue;
      ++total[g.at(i).upos];
      if (p.at(i).head == g.at(i).head && p.at(i).deprel == g.at(i).deprel) ++correct[g.at(i).upos];
    }
  }
  std::map<std::string, double> out;
  for (const auto& [tag, count] : total)
    out[tag] = 100.0 * static_cast<double>(correct[tag]) / static_cast<double>(count);
  return out;
}

std::vector<DistanceBucket> default_distance_buckets() {
  return {{"1", 1, 1}, {"2", 2, 2}, {"3-6", 3, 6}, {">=7", 7, std::numeric_limits<int>::max()}};
}

std::map<std::string, double> f_by_distance(const Treebank& gold, const Treebank& pred) {
  return f_by_distance(gold, pred, default_distance_buckets());
}

std::map<std::string, double> f_by_distance(const Treebank& gold, const Treebank& pred,
                                            const std::vector<DistanceBucket>& buckets) {
  check_aligned(gold, pred);
  auto bucket_of = [&buckets](int head, int dep) -> std::string {
    if (head == 0) return "root";
    const int d = std::abs(head - dep);
    for (const DistanceBucket& b : buckets)
      if (d >= b.lo && d <= b.hi) return b.name;
    return buckets.back().name;  // open-ended fallback
  };

  std::map<std::string, long long> gold_count, pred_count, correct;
  for (const DistanceBucket& b : buckets) {
    gold_count[b.name] = 0;
    pred_count[b.name] = 0;
    correct[b.name] = 0;
  }
  gold_count["root"] = pred_count["root"] = correct["root"] = 0;

  for (std::size_t s = 0; s < gold.trees.size(); ++s) {
    const DependencyTree& g = gold.trees[s];
    const DependencyTree& p = pred.trees[s];
    for (int i = 1; i <= g.size(); ++i) {
      if (is_punct(g.at(i))) continue;
      ++gold_count[bucket_of(g.at(i).head, i)];
      ++pred_count[bucket_of(p.at(i).head, i)];
      if (p.at(i).head == g.at(i).head && p.at(i).deprel == g.at(i).deprel)
        ++correct[bucket_of(g.at(i).head, i)];
    }
  }
  std::map<std::string, double> out;
  for (const auto& [name, gc] : gold_count) {
    const long long pc = pred_count[name];
    const long long ok = correct[name];
    const double prec = pc > 0 ? static_cast<double>(ok) / static_cast<double>(pc) : 0.0;
    const double rec = gc > 0 ? static_cast<double>(ok) / static_cast<double>(gc) : 0.0;
    out[name] = prec + rec > 0 ? 100.0 * 2.0 * prec * rec / (prec + rec) : 0.0;
  }
  return out;
}

MetricsReport full_report(const Treebank& gold, const Treebank& pred) {
  MetricsReport report = score(gold, pred);
  report.per_pos_f = f_by_pos(gold, pred);
  report.per_distance_f = f_by_distance(gold, pred);
  return report;
}

std::string MetricsReport::to_text() const {
  std::ostringstream out;
  out << "UAS  " << format2(uas) << "\n";
  out << "LAS  " << format2(las) << "\n";
  out << "evaluated " << evaluated << "  excluded-punct " << excluded << "\n";
  if (!per_pos_f.empty()) {
    out << "labeled F by POS\n";
    for (const auto& [tag, f] : per_pos_f)
      out << "  " << std::left << std::setw(8) << tag << format2(f) << "\n";
  }
  if (!per_distance_f.empty()) {
    out << "labeled F by arc distance\n";
    // fixed display order
    std::vector<std::string> order = {"1", "2", "3-6", ">=7", "root"};
    for (const std::string& name : order) {
      auto it = per_distance_f.find(name);
      if (it != per_distance_f.end())
        out << "  " << std::left << std::setw(8) << name << format2(it->second) << "\n";
    }
    for (const auto& [name, f] : per_distance_f) {
      if (std::find(order.begin(), order.end(), name) == order.end())
        out << "  " << std::left << std::setw(8) << name << format2(f) << "\n";
    }
  }
  return out.str();
}

// ---- experiment harnesses ----

namespace {

struct Task {
  std::size_t row = 0;
  const Treebank* train_bank = nullptr;
  double lambda = 0;
  int trial = 0;
};

void run_tasks(const ExperimentInputs& in, const std::vector<Task>& tasks,
               std::vector<SweepRow>& rows) {
  auto run_one = [&in, &rows](const Task& task) {
    ParserConfig cfg = in.parser;
    cfg.seed = in.seed + static_cast<std::uint64_t>(task.trial);
    ParserModel model = ParserModel::train(*task.train_bank, in.embeddings, in.clusters, cfg);
    Treebank pred = model.parse(*in.eval_bank);
    MetricsReport report = score(*in.eval_bank, pred);
    rows[task.row] = {task.lambda, task.trial, report.uas, report.las};
  };

  const int jobs = std::max(1, in.jobs);
  if (jobs == 1 || tasks.size() <= 1) {
    for (const Task& t : tasks) run_one(t);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t k = next.fetch_add(1);
        if (k >= tasks.size()) return;
        run_one(tasks[k]);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

void require_inputs(const ExperimentInputs& in) {
  if (!in.source || !in.matrices || !in.pairs || !in.eval_bank)
    throw ContractViolation("experiment inputs incomplete");
  if (in.trials < 1) throw ConfigError("trials must be at least 1");
}

}  // namespace

std::vector<SweepRow> sweep_lambda(const ExperimentInputs& in, const std::vector<double>& grid) {
  require_inputs(in);
  // One translation per lambda, shared across trials.
  std::vector<Treebank> banks;
  banks.reserve(grid.size());
  for (double lambda : grid) {
    CodeMixConfig cm = in.codemix;
    cm.lambda = lambda;
    Treebank translated = translate_treebank(*in.source, *in.matrices, *in.pairs, cm);
    banks.push_back(in.mix_with_source ? mix_corpora(*in.source, translated)
                                       : std::move(translated));
  }
  std::vector<Task> tasks;
  std::vector<SweepRow> rows(grid.size() * static_cast<std::size_t>(in.trials));
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    for (int trial = 0; trial < in.trials; ++trial) {
      Task t;
      t.row = gi * static_cast<std::size_t>(in.trials) + static_cast<std::size_t>(trial);
      t.train_bank = &banks[gi];
      t.lambda = grid[gi];
      t.trial = trial;
      tasks.push_back(t);
    }
  }
  run_tasks(in, tasks, rows);
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "lambda,trial,uas,las\n";
  for (const SweepRow& r : rows) {
    out << r.lambda << ',' << r.trial << ',' << format2(r.uas) << ',' << format2(r.las) << "\n";
  }
  return out.str();
}

std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows) {
  std::vector<SweepSummary> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    while (j < rows.size() && rows[j].lambda == rows[i].lambda) ++j;
    const double count = static_cast<double>(j - i);
    SweepSummary s;
    s.lambda = rows[i].lambda;
    for (std::size_t k = i; k < j; ++k) {
      s.mean_uas += rows[k].uas;
      s.mean_las += rows[k].las;
    }
    s.mean_uas /= count;
    s.mean_las /= count;
    for (std::size_t k = i; k < j; ++k) {
      s.sd_uas += (rows[k].uas - s.mean_uas) * (rows[k].uas - s.mean_uas);
      s.sd_las += (rows[k].las - s.mean_las) * (rows[k].las - s.mean_las);
    }
    s.sd_uas = std::sqrt(s.sd_uas / count);
    s.sd_las = std::sqrt(s.sd_las / count);
    out.push_back(s);
    i = j;
  }
  return out;
}

std::string sweep_table(const std::vector<SweepSummary>& rows) {
  std::ostringstream out;
  out << "lambda   UAS(mean/sd)      LAS(mean/sd)\n";
  for (const SweepSummary& s : rows) {
    out << std::left << std::setw(9) << s.lambda << std::setw(18)
        << (format2(s.mean_uas) + " / " + format2(s.sd_uas)) << format2(s.mean_las) << " / "
        << format2(s.sd_las) << "\n";
  }
  return out.str();
}

std::vector<AblationRow> ablation(const ExperimentInputs& in, double lambda) {
  require_inputs(in);
  struct Combo {
    const char* name;
    bool deletion;
    bool reordering;
  };
  const Combo combos[] = {
      {"Mix", true, true},
      {"-Sentence Reordering", true, false},
      {"-Word Deletion", false, true},
      {"-Both", false, false},
  };
  std::vector<AblationRow> out;
  for (const Combo& combo : combos) {
    ExperimentInputs sub = in;
    sub.codemix.lambda = lambda;
    sub.codemix.enable_deletion = combo.deletion;
    sub.codemix.enable_reordering = combo.reordering;
    std::vector<SweepRow> rows = sweep_lambda(sub, {lambda});
    SweepSummary s = summarize_sweep(rows).front();
    out.push_back({combo.name, combo.deletion, combo.reordering, s.mean_uas, s.mean_las});
  }
  return out;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "Model" << std::setw(10) << "UAS" << "LAS\n";
  for (const AblationRow& r : rows)
    out << std::left << std::setw(24) << r.name << std::setw(10) << format2(r.uas)
        << format2(r.las) << "\n";
  return out.str();
}

}  // namespace codemix
