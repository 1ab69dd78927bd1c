// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "vale/bleu.hpp"
#include "vale/codec.hpp"
#include "vale/error.hpp"
#include "vale/model_gateway.hpp"
#include "vale/partition.hpp"
#include "vale/segment.hpp"
#include "vale/shap.hpp"
#include "vale/transport.hpp"
#include "vale/vlm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vale;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

int failures = 0;

void report(const std::string& name, const std::function<void(Outcome&)>& body) {
  Outcome o;
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << "unexpected exception: " << e.what();
  }
  if (!o.pass) ++failures;
  std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail.str() << std::endl;
}

FunctionGame table_game(std::vector<double> table, int m) {
  return FunctionGame(m, [table = std::move(table)](const Coalition& c) { return table[oracle::bits_of(c)]; });
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// ---------------------------------------------------------------------------

void shapley_exactness(Outcome& o) {
  const auto start = Clock::now();
  std::mt19937_64 rng(2024);
  int games = 0;
  double worst = 0.0;
  for (int round = 0; round < 8; ++round)
    for (int m = 1; m <= 8; ++m) {
      const auto table = oracle::random_table(m, rng);
      const auto phi = exact_shapley(table_game(table, m)).values;
      const oracle::ValueFn v = [&](std::uint32_t s) { return table[s]; };
      worst = std::max(worst, max_abs_diff(phi, oracle::shapley_by_subsets(m, v)));
      worst = std::max(worst, max_abs_diff(phi, oracle::shapley_by_permutations(m, v)));
      ++games;
    }
  const double secs = seconds_since(start);
  o.require(games >= 50, "at least 50 games");
  o.require(worst <= 1e-9, "max abs error <= 1e-9");
  o.require(secs < 10.0, "runtime < 10 s");
  o.detail << games << " games (M=1..8), max |phi - oracle| over subset and permutation oracles = " << worst << ", " << secs << " s";
}

void shapley_axioms(Outcome& o) {
  std::mt19937_64 rng(99);
  double effWorst = 0.0, symWorst = 0.0, dummyWorst = 0.0, linWorst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + trial % 7;
    const auto t1 = oracle::random_table(m, rng), t2 = oracle::random_table(m, rng);
    const auto full = (std::uint32_t{1} << m) - 1;

    const auto phi1 = exact_shapley(table_game(t1, m)).values;
    const double sum = std::accumulate(phi1.begin(), phi1.end(), 0.0);
    effWorst = std::max(effWorst, std::abs(sum - (t1[full] - t1[0])));

    // Players 0 and 1 interchangeable: v depends on them only through their count.
    auto sym = t1;
    for (std::uint32_t s = 0; s <= full; ++s) {
      const bool a = s & 1u, b = s & 2u;
      if (a && !b) sym[s] = t1[(s & ~1u) | 2u];
    }
    const auto phiSym = exact_shapley(table_game(sym, m)).values;
    symWorst = std::max(symWorst, std::abs(phiSym[0] - phiSym[1]));

    // The last player never changes the value.
    const int d = m - 1;
    auto dummy = t1;
    for (std::uint32_t s = 0; s <= full; ++s) dummy[s] = t1[s & ~(1u << d)];
    dummyWorst = std::max(dummyWorst, std::abs(exact_shapley(table_game(dummy, m)).values[d]));

    // phi(a v + b w) = a phi(v) + b phi(w)
    const double a = 0.5 + trial, b = -1.25;
    std::vector<double> mix(t1.size());
    for (std::size_t s = 0; s < mix.size(); ++s) mix[s] = a * t1[s] + b * t2[s];
    const auto phi2 = exact_shapley(table_game(t2, m)).values;
    const auto phiMix = exact_shapley(table_game(mix, m)).values;
    for (int i = 0; i < m; ++i) linWorst = std::max(linWorst, std::abs(phiMix[i] - (a * phi1[i] + b * phi2[i])));
  }
  o.require(effWorst <= 1e-9, "efficiency");
  o.require(symWorst <= 1e-9, "symmetry");
  o.require(dummyWorst <= 1e-9, "dummy");
  o.require(linWorst <= 1e-9, "linearity");
  o.detail << "efficiency " << effWorst << ", symmetry " << symWorst << ", dummy " << dummyWorst << ", linearity "
           << linWorst << " over 20 games";
}

void sampling_convergence(Outcome& o) {
  const auto start = Clock::now();
  // 48x64 scene, 3x4 grid (M = 12). The detector block straddles four cells
  // with different overlaps; the remaining cells are dummies.
  Image img(64, 48, 1);
  for (int r = 0; r < 48; ++r)
    for (int c = 0; c < 64; ++c) img.at(r, c) = 0.3f + 0.6f * ((r / 4 + c / 4) % 2);
  ToyPatchConfig pc;
  pc.top = 0.2, pc.bottom = 0.55, pc.left = 0.15, pc.right = 0.45;
  pc.gain = 12.0, pc.threshold = 0.4;
  const auto model = make_toy_patch(pc);
  const auto partition = std::make_shared<const SuperpixelPartition>(partition_grid(img, 3, 4));
  const auto policy = MaskingPolicy::fixed_color(0.0f);
  const auto exact = shapley_exact(*model, img, partition, policy, "patch");
  const int exactRoi = extract_roi(exact, 1).regions[0];

  const std::vector<int> budgets{100, 200, 300, 500, 1000};
  std::vector<double> mae;
  int roiHits = 0;
  for (int budget : budgets) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      EstimatorConfig cfg{budget, 50, Sampler::permutation, seed};
      const auto est = shapley_sampled(*model, img, partition, policy, "patch", cfg);
      double err = 0.0;
      for (int i = 0; i < partition->region_count(); ++i) err += std::abs(est.regionValues[i] - exact.regionValues[i]);
      total += err / partition->region_count();
      if (budget == 1000 && extract_roi(est, 1).regions[0] == exactRoi) ++roiHits;
    }
    mae.push_back(total / 20.0);
  }
  bool monotone = true;
  for (std::size_t i = 1; i < mae.size(); ++i) monotone = monotone && mae[i] <= mae[i - 1];
  const double secs = seconds_since(start);
  o.require(partition->region_count() == 12, "M = 12");
  o.require(monotone, "MAE non-increasing");
  o.require(roiHits >= 18, "ROI agreement >= 18/20");
  o.require(secs < 120.0, "runtime < 2 min");
  o.detail << "MAE";
  for (std::size_t i = 0; i < mae.size(); ++i) o.detail << " " << budgets[i] << ":" << mae[i];
  o.detail << ", ROI match " << roiHits << "/20, " << secs << " s";
}

void roi_extraction(Outcome& o) {
  const std::vector<std::function<double(double)>> transforms{
      [](double x) { return x; },
      [](double x) { return 2.0 * x + 5.0; },
      [](double x) { return std::exp(x); },
      [](double x) { return x * x * x + x; },
      [](double x) { return std::atan(x - 2.0); },
  };
  long long cases = 0;
  for (int n = 1; n <= 6; ++n) {
    // n vertical 4x4 strips, labeled directly so n = 1 is allowed.
    std::vector<std::int32_t> labels(static_cast<std::size_t>(n) * 16);
    for (std::size_t p = 0; p < labels.size(); ++p) labels[p] = static_cast<std::int32_t>((p % (n * 4)) / 4);
    const auto partition = std::make_shared<const SuperpixelPartition>(n * 4, 4, labels);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    do {
      for (const auto& f : transforms) {
        ShapleyValues sv;
        for (int i = 0; i < n; ++i) sv.values.push_back(f(perm[i] * 0.7 - 1.0));
        const auto map = make_attribution_map(partition, sv, "x");
        // Expected descending order: region with the highest rank first.
        std::vector<int> expected(n);
        for (int i = 0; i < n; ++i) expected[n - 1 - perm[i]] = i;
        for (int k = 1; k <= n; ++k) {
          const auto roi = extract_roi(map, k);
          o.require(std::equal(roi.regions.begin(), roi.regions.end(), expected.begin()) &&
                        static_cast<int>(roi.regions.size()) == k,
                    "argsort order");
          for (int j = 0; j < k; ++j) {
            const auto& c = partition->centroids()[roi.regions[j]];
            o.require(std::abs(roi.centroids[j].row - c.row) < 1e-12 && std::abs(roi.centroids[j].col - c.col) < 1e-12,
                      "centroid of the selected region");
            o.require(partition->label(roi.points[j].row, roi.points[j].col) == roi.regions[j],
                      "prompt point inside its region");
          }
          ++cases;
        }
        o.require(top_regions(map.regionValues, n) == expected, "top_regions order");
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  o.detail << cases << " (permutation, transform, k) cases over n=1..6";
}

void builtin_segmentation(Outcome& o) {
  std::mt19937 rng(31);
  std::uniform_real_distribution<float> noise(-0.015f, 0.015f);
  double worstIoU = 1.0;
  bool nested = true;
  for (int i = 0; i < 20; ++i) {
    const int w = 64 + 8 * (i % 3), h = 56 + 8 * (i % 2);
    Image img(w, h, 3);
    Mask truth(w, h);
    const float bg[3] = {0.15f + 0.02f * (i % 4), 0.2f, 0.25f};
    const float fg[3] = {0.85f - 0.02f * (i % 5), 0.7f, 0.2f + 0.03f * (i % 3)};
    const int cr = h / 2 + (i % 5) - 2, cc = w / 2 + (i % 7) - 3;
    const int hr = 10 + i % 6, hc = 12 + (i * 3) % 8;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        bool inside;
        if (i % 2 == 0) {
          inside = std::abs(r - cr) < hr && std::abs(c - cc) < hc;  // block
        } else {
          const double dr = double(r - cr) / hr, dc = double(c - cc) / hc;  // blob
          inside = dr * dr + dc * dc <= 1.0 + 0.15 * std::sin(6.0 * std::atan2(dr, dc));
        }
        truth.set(r, c, inside);
        // Gentle shading inside the object exercises the tolerance scales.
        const float shade = inside ? 0.04f * float(c - cc) / hc : 0.0f;
        for (int k = 0; k < 3; ++k) img.at(r, c, k) = std::clamp((inside ? fg[k] : bg[k]) + shade + noise(rng), 0.0f, 1.0f);
      }
    const auto prompt = PointPrompt::foreground_only({Pixel{cr, cc}});
    const auto cands = segment_builtin(img, prompt, 0.1);
    for (std::size_t j = 1; j < cands.size(); ++j) nested = nested && is_subset(cands[j - 1].mask, cands[j].mask);
    const auto best = select_best(cands, img);
    worstIoU = std::min(worstIoU, intersection_over_union(best.mask.mask, truth));
  }
  o.require(worstIoU >= 0.95, "best candidate IoU >= 0.95");
  o.require(nested, "tolerance nesting");
  o.detail << "20 images (10 blocks, 10 blobs), worst IoU " << worstIoU << ", nesting " << (nested ? "holds" : "broken");
}

void bleu_checks(Outcome& o) {
  const auto ident = tokenize("A bald eagle with a white head perched on a branch.");
  const double identity = bleu(ident, {ident}).score;
  const double hand = bleu({"the", "the", "the", "the"}, {{"the", "cat", "on", "the", "mat"}}, 1).score;
  const double zero = bleu(tokenize("the eagle sits on a branch"), {tokenize("the eagle on a branch sits")}).score;
  o.require(identity == 1.0, "identity == 1.0");
  o.require(std::abs(hand - 0.3894) <= 1e-4, "hand case 0.3894");
  o.require(zero == 0.0, "zero 4-gram overlap == 0.0");

  const std::vector<std::string> vocab{"a", "b", "c"};
  std::mt19937 rng(7);
  int agree = 0, nonzero = 0;
  for (int i = 0; i < 200; ++i) {
    Tokens cand(1 + rng() % 6), ref(1 + rng() % 6);
    for (auto* t : {&cand, &ref})
      for (auto& w : *t) w = vocab[rng() % vocab.size()];
    bool same = true;
    for (int order = 1; order <= 4; ++order) same = same && bleu(cand, {ref}, order).score == oracle::bleu(cand, {ref}, order, vocab);
    if (same) ++agree;
    if (bleu(cand, {ref}).score > 0.0) ++nonzero;
  }
  o.require(agree == 200, "oracle agreement on 200 pairs");
  o.detail << "identity " << identity << ", hand " << hand << ", zero " << zero << ", oracle " << agree
           << "/200 exact (orders 1-4; " << nonzero << " nonzero at order 4)";
}

std::string file_text(const fs::path& p) {
  const auto b = read_file(p);
  return {b.begin(), b.end()};
}

void e2e_determinism(Outcome& o) {
  const fs::path fixtures = VALE_FIXTURES_DIR;
  const fs::path work = fs::temp_directory_path() / "vale_acceptance_e2e";
  fs::remove_all(work);
  const auto start = Clock::now();
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + VALE_CLI_PATH + "\" explain --config \"" +
                            (fixtures / "bald_eagle" / "config.json").string() + "\" --image \"" +
                            (fixtures / "bald_eagle" / "image.png").string() + "\" --out \"" + (work / run).string() +
                            "\" > \"" + (work.string() + "_" + run + ".log") + "\" 2>&1";
    o.require(std::system(cmd.c_str()) == 0, std::string("vale explain run ") + run + " exits 0");
  }
  const double secs = seconds_since(start);
  int identical = 0;
  const char* files[] = {"record.json", "heatmap.png", "roi.png", "mask.png", "segmented.png"};
  for (const char* f : files) {
    const bool same = fs::exists(work / "a" / f) && read_file(work / "a" / f) == read_file(work / "b" / f);
    o.require(same, std::string(f) + " byte-identical");
    identical += same;
  }
  std::string prompt;
  double confidence = -1.0;
  if (fs::exists(work / "a" / "record.json")) {
    const auto rec = json::parse(file_text(work / "a" / "record.json"));
    prompt = rec.value("/prompt/text"_json_pointer, std::string());
    confidence = rec.value("/segmentation/confidence"_json_pointer, -1.0);
  }
  o.require(prompt == "Explain the object in the image: 'bald_eagle'?", "prompt text");
  o.require(confidence == 0.932, "mask confidence 0.932");
  o.require(secs < 30.0, "runtime < 30 s");
  o.detail << identical << "/5 artifacts identical, prompt \"" << prompt << "\", confidence " << confidence << ", "
           << secs << " s for two runs";
}

std::shared_ptr<const Transport> canned(const std::string& path, std::string body) {
  auto t = std::make_shared<InProcessTransport>();
  t->route(path, [body = std::move(body)](const std::string&) { return HttpResponse{200, body}; });
  return t;
}

template <typename Call>
bool rejected_with_protocol_error(Call&& call, std::string& seen) {
  try {
    call();
    seen = "accepted";
  } catch (const ProtocolError&) {
    return true;
  } catch (const std::exception& e) {
    seen = e.what();
  }
  return false;
}

void wire_validation(Outcome& o) {
  const Image img(8, 6, 3, 0.5f);
  const auto maskB64 = [](int w, int h) { return base64_encode(encode_mask_png(Mask(w, h, true))); };

  const std::vector<std::string> predict{
      R"({"labels": ["a", "b"], "probabilities": [0.5, 0.5)",     // truncated JSON
      R"([{"labels": ["a"], "probabilities": [1.0]}])",           // not an object
      R"({"probabilities": [1.0]})",                              // no labels
      R"({"labels": ["a", "b"], "probabilities": [1.0]})",        // length mismatch
      R"({"labels": ["a", "b"], "probabilities": [1.5, -0.5]})",  // out of range
      R"({"labels": ["a", "b"], "probabilities": [0.6, 0.3]})",   // does not sum to one
      R"({"labels": [1, 2], "probabilities": [0.5, 0.5]})",       // non-string labels
  };
  const std::vector<std::string> segment{
      "not json",
      R"({"candidates": []})",
      R"({"masks": []})",
      R"({"masks": [{"png": "@@not base64@@", "confidence": 0.5}]})",
      R"({"masks": [{"png": ")" + maskB64(4, 4) + R"(", "confidence": 0.5}]})",  // wrong dimensions
      R"({"masks": [{"png": ")" + maskB64(8, 6) + R"(", "confidence": 1.5}]})",
      R"({"masks": [{"png": ")" + maskB64(8, 6) + R"(", "confidence": "high"}]})",
  };
  const std::vector<std::string> caption{
      "",
      R"(["a caption"])",
      R"({"model": "m"})",
      R"({"text": 42, "model": "m"})",
      R"({"text": "", "model": "m"})",
      R"({"text": "A bird."})",
      R"({"text": "A bird.", "model": "m")",
  };

  const RetryPolicy once{1, std::chrono::milliseconds(0)};
  int rejected = 0, total = 0;
  std::string seen;
  for (const auto& body : predict) {
    RemotePredictorConfig cfg;
    cfg.endpoint = "http://mock.invalid";
    cfg.retry = once;
    const auto model = make_remote(cfg, canned("/predict", body));
    const bool ok = rejected_with_protocol_error([&] { model->predict(std::vector<Image>{img}); }, seen);
    o.require(ok, "/predict corruption " + std::to_string(total) + " (" + seen + ")");
    rejected += ok, ++total;
  }
  for (const auto& body : segment) {
    const auto t = canned("/segment", body);
    const bool ok = rejected_with_protocol_error(
        [&] { segment_remote(*t, img, PointPrompt::foreground_only({Pixel{2, 2}}), once); }, seen);
    o.require(ok, "/segment corruption " + std::to_string(total - 7) + " (" + seen + ")");
    rejected += ok, ++total;
  }
  for (const auto& body : caption) {
    const auto t = canned("/caption", body);
    const bool ok = rejected_with_protocol_error([&] { vale::caption(*t, CaptionRequest{img, "Describe it."}, once); }, seen);
    o.require(ok, "/caption corruption " + std::to_string(total - 14) + " (" + seen + ")");
    rejected += ok, ++total;
  }
  o.detail << rejected << "/" << total << " corrupted responses rejected with ProtocolError";
}

}  // namespace

int main() {
  report("shapley-exactness", shapley_exactness);
  report("shapley-axioms", shapley_axioms);
  report("sampling-convergence", sampling_convergence);
  report("roi-extraction", roi_extraction);
  report("builtin-segmentation", builtin_segmentation);
  report("bleu", bleu_checks);
  report("e2e-determinism", e2e_determinism);
  report("wire-contract-validation", wire_validation);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
