#include "haptigrasp/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "haptigrasp/digest.hpp"
#include "haptigrasp/error.hpp"

namespace hg {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kMetricsFormatVersion = 1;

// Stream indices for seeds derived from the run seed.
enum : std::uint64_t { kAeStream = 11, kStabilityStream = 12, kPolicyStream = 13 };

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::string& path, const std::string& text) {
  fs::create_directories(fs::path(path).parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out << text;
  }
  fs::rename(tmp, path);
}

json base_provenance(const CommandContext& ctx) {
  return {{"config_digest", config_digest(ctx.config)}, {"seed", ctx.config.seed}};
}

std::string manifest_path(const CommandContext& ctx) { return ctx.dataset_dir() + "/manifest.json"; }
std::string ae_path(const CommandContext& ctx) { return ctx.models_dir() + "/autoencoder.hgw"; }
std::string stability_path(const CommandContext& ctx) { return ctx.models_dir() + "/stability.hgw"; }
std::string policy_path(const CommandContext& ctx) { return ctx.models_dir() + "/policy.hgw"; }

// Checks the dataset files against the manifest and returns the manifest
// digest, the identity downstream artifacts record.
std::string verified_dataset_digest(const CommandContext& ctx) {
  const std::string mpath = manifest_path(ctx);
  const json m = json::parse(slurp(mpath));
  const DatasetFiles files = ctx.dataset_files();
  for (const auto& [name, path] : {std::pair{"records", files.records_path}, std::pair{"haptics", files.haptics_path}})
    if (file_digest(path) != m.at("files").at(name).get<std::string>())
      throw ProvenanceError(path + " does not match the dataset manifest");
  if (file_digest(ctx.catalog_path()) != m.at("provenance").at("catalog_digest").get<std::string>())
    throw ProvenanceError("catalog changed since the dataset was collected");
  return file_digest(mpath);
}

Dataset load_verified_dataset(const CommandContext& ctx, std::string* digest) {
  *digest = verified_dataset_digest(ctx);
  Dataset ds = read_dataset(ctx.dataset_files()).dataset;
  verify_disjoint(ds, read_catalog(ctx.catalog_path()));
  return ds;
}

json weight_provenance(const WeightFile& f) {
  try {
    return json::parse(f.metadata).at("provenance");
  } catch (const json::exception&) {
    throw ProvenanceError("weight file lacks provenance metadata");
  }
}

json metrics_json(const ClassificationMetrics& m) {
  json confusion = json::array();
  for (int i = 0; i < m.confusion.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.confusion.cols(); ++j) row.push_back(m.confusion(i, j));
    confusion.push_back(std::move(row));
  }
  return {{"n", m.n},
          {"accuracy", m.accuracy},
          {"average_class_accuracy", m.average_class_accuracy},
          {"majority_rate", m.majority_rate},
          {"confusion", std::move(confusion)}};
}

json arms_json(const GraspingTable& t) {
  json arms = json::array();
  for (const auto& a : t.arms) {
    std::string outcomes;
    for (char c : a.outcomes) outcomes += c ? '1' : '0';
    arms.push_back({{"name", a.name},
                    {"trials", a.trials},
                    {"successes", a.successes},
                    {"accuracy", a.accuracy()},
                    {"grasps", a.grasps},
                    {"outcomes", outcomes}});
  }
  return arms;
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::vector<GraspRef> train_grasps(const Dataset& ds) { return all_grasps(ds, Split::train); }

}  // namespace

std::string CommandContext::path(const std::string& relative) const {
  return (fs::path(root) / relative).lexically_normal().string();
}

DatasetFiles CommandContext::dataset_files() const {
  return {dataset_dir() + "/episodes.jsonl", dataset_dir() + "/haptics.bin"};
}

json sealed_document(const std::string& kind, const json& provenance, const json& payload) {
  json doc{{"format_version", kMetricsFormatVersion}, {"kind", kind}, {"provenance", provenance}, {"payload", payload}};
  doc["digest"] = digest_hex(doc.dump());
  return doc;
}

json open_sealed(const std::string& path, const std::string& kind) {
  json doc;
  try {
    doc = json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw ProvenanceError(path + " is not a metrics document: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("digest") || !doc["digest"].is_string())
    throw ProvenanceError(path + " carries no digest");
  const std::string stored = doc["digest"].get<std::string>();
  doc.erase("digest");
  if (digest_hex(doc.dump()) != stored) throw ProvenanceError(path + " was modified after it was written");
  if (doc.value("format_version", 0) != kMetricsFormatVersion) throw VersionError(path);
  if (doc.value("kind", std::string()) != kind) throw ProvenanceError(path + " is not a " + kind + " document");
  return doc;
}

std::string cmd_gen_catalog(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  const Catalog cat = generate_catalog(c.seed, c.catalog.n_train, c.catalog.n_test);
  validate_catalog(cat, c.sim);
  write_text(ctx.catalog_path(), "# provenance " + base_provenance(ctx).dump() + "\n" + catalog_to_text(cat));
  return "gen-catalog: " + std::to_string(c.catalog.n_train) + " train, " + std::to_string(c.catalog.n_test) +
         " test objects -> " + ctx.catalog_path();
}

std::string cmd_collect(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  const Catalog cat = read_catalog(ctx.catalog_path());
  validate_catalog(cat, c.sim);
  const CollectionPlan plan = plan_collection(cat, c.collection, c.seed);
  const Dataset ds = collect_dataset(cat, c.collection_params(), c.seed);
  json prov = base_provenance(ctx);
  prov["catalog_digest"] = file_digest(ctx.catalog_path());
  fs::create_directories(ctx.dataset_dir());
  const DatasetFiles files = ctx.dataset_files();
  write_dataset(files, ds, prov.dump());

  const auto tally_json = [](const CollectionTally& t) {
    return json{{"objects", t.objects},
                {"records", t.records},
                {"initial_grasps", t.initial_grasps},
                {"regrasp_interactions", t.regrasp_interactions},
                {"executed_grasps", t.executed_grasps}};
  };
  const json manifest{{"format_version", kDatasetFormatVersion},
                      {"provenance", prov},
                      {"files", {{"records", file_digest(files.records_path)}, {"haptics", file_digest(files.haptics_path)}}},
                      {"planned", {{"train", tally_json(plan.tally(Split::train, cat))},
                                   {"test", tally_json(plan.tally(Split::test, cat))}}},
                      {"collected", tally_json(ds.tally())}};
  write_text(manifest_path(ctx), manifest.dump(2) + "\n");
  const CollectionTally t = ds.tally();
  return "collect: " + std::to_string(t.records) + " records, " + std::to_string(t.executed_grasps) +
         " executed grasps, " + std::to_string(t.regrasp_interactions) + " re-grasps -> " + ctx.dataset_dir();
}

std::string cmd_train_ae(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  std::string ds_digest;
  const Dataset ds = load_verified_dataset(ctx, &ds_digest);
  const std::vector<GraspRef> refs = train_grasps(ds);
  std::vector<InputSequence> inputs;
  inputs.reserve(refs.size());
  for (const auto& r : refs) inputs.push_back(raw_input(at(ds, r).haptics, c.encoder, c.sim.f_max));
  Rng rng(derive_seed(c.seed, kAeStream));
  AutoencoderResult res = train_autoencoder(inputs, c.encoder, rng);

  json prov = base_provenance(ctx);
  prov["dataset_digest"] = ds_digest;
  fs::create_directories(ctx.models_dir());
  save_weights(ae_path(ctx), to_weight_file(res.model, prov.dump()));

  std::vector<std::string> ids;
  for (const auto& r : refs) ids.push_back(ds.records[r.record].episode_id + "/" + std::to_string(r.grasp));
  write_latents_tsv(ctx.models_dir() + "/latents.tsv", ids, encode_batch(res.model, inputs));

  prov["autoencoder_digest"] = file_digest(ae_path(ctx));
  const TrainingCurve& k = res.curve;
  const json payload{{"train_loss", k.train_loss},
                     {"validation_loss", k.validation_loss},
                     {"baseline_train", k.baseline_train},
                     {"baseline_validation", k.baseline_validation},
                     {"train_episodes", k.train_episodes},
                     {"validation_episodes", k.validation_episodes}};
  write_text(ctx.reports_dir() + "/autoencoder.json", sealed_document("autoencoder", prov, payload).dump(2) + "\n");
  char buf[160];
  std::snprintf(buf, sizeof buf, "train-ae: %d episodes, train %.4f val %.4f (baseline %.4f) -> %s", k.train_episodes,
                k.train_loss.back(), k.validation_loss.back(), k.baseline_train, ae_path(ctx).c_str());
  return buf;
}

std::string cmd_train_heads(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  std::string ds_digest;
  const Dataset ds = load_verified_dataset(ctx, &ds_digest);
  const WeightFile aw = load_weights(ae_path(ctx));
  if (weight_provenance(aw).value("dataset_digest", "") != ds_digest)
    throw ProvenanceError("autoencoder was trained on a different dataset");
  const Autoencoder ae = autoencoder_from_weight_file(aw);

  const std::vector<GraspRef> refs = train_grasps(ds);
  const Eigen::MatrixXd x = grasp_features(ds, refs, FeatureKind::autoencoder, ae, c.sim.f_max);
  std::vector<int> y;
  for (const auto& r : refs) y.push_back(at(ds, r).outcome.success ? 1 : 0);
  Rng srng(derive_seed(c.seed, kStabilityStream));
  Classifier stability = train_stability(x, y, c.stability, srng);

  const std::vector<GraspRef> pairs = regrasp_pairs(ds, Split::train);
  const Eigen::MatrixXd xp = grasp_features(ds, pairs, FeatureKind::autoencoder, ae, c.sim.f_max);
  std::vector<PolicyExample> examples;
  for (const auto& r : pairs) {
    const GraspRecord& g = at(ds, r);
    examples.push_back({c.bins.encode(*g.delta_after), ds.records[r.record].grasps[r.grasp + 1].outcome.success ? 1 : 0});
  }
  Rng prng(derive_seed(c.seed, kPolicyStream));
  RegraspPolicy policy = train_policy(xp, examples, c.policy, c.bins, prng);

  json prov = base_provenance(ctx);
  prov["dataset_digest"] = ds_digest;
  prov["autoencoder_digest"] = file_digest(ae_path(ctx));
  save_weights(stability_path(ctx), to_weight_file(stability, prov.dump()));
  save_weights(policy_path(ctx), to_weight_file(policy, prov.dump()));
  return "train-heads: stability on " + std::to_string(refs.size()) + " grasps, policy on " +
         std::to_string(pairs.size()) + " re-grasps -> " + ctx.models_dir();
}

Models load_models(const CommandContext& ctx) {
  const std::string ds_digest = verified_dataset_digest(ctx);
  const WeightFile aw = load_weights(ae_path(ctx));
  if (weight_provenance(aw).value("dataset_digest", "") != ds_digest)
    throw ProvenanceError("autoencoder was trained on a different dataset");
  const std::string ae_digest = file_digest(ae_path(ctx));
  const WeightFile sw = load_weights(stability_path(ctx));
  const WeightFile pw = load_weights(policy_path(ctx));
  for (const auto* w : {&sw, &pw})
    if (weight_provenance(*w).value("autoencoder_digest", "") != ae_digest)
      throw ProvenanceError("heads were trained on a different autoencoder");
  Models m;
  m.autoencoder = autoencoder_from_weight_file(aw);
  m.stability = classifier_from_weight_file(sw);
  m.policy = policy_from_weight_file(pw);
  if (m.policy.bins.lo != ctx.config.bins.lo || m.policy.bins.hi != ctx.config.bins.hi)
    throw FingerprintError("policy bins differ from the configured bins");
  return m;
}

std::string cmd_eval_perception(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  std::string ds_digest;
  const Dataset ds = load_verified_dataset(ctx, &ds_digest);
  const WeightFile aw = load_weights(ae_path(ctx));
  if (weight_provenance(aw).value("dataset_digest", "") != ds_digest)
    throw ProvenanceError("autoencoder was trained on a different dataset");
  const Autoencoder ae = autoencoder_from_weight_file(aw);
  const PerceptionTable t = evaluate_perception(ds, ae, c.perception_protocol(), c.sim.f_max);

  json cells = json::array();
  std::ostringstream tsv;
  tsv << "task\tfeatures\tclassifier\tscore\taccuracy\taverage_class_accuracy\tmajority_rate\tn\n";
  for (const auto& cell : t.cells) {
    json j = metrics_json(cell.metrics);
    j["task"] = cell.task;
    j["features"] = to_string(cell.features);
    j["classifier"] = to_string(cell.classifier);
    j["score"] = cell.score;
    j["classes"] = cell.classes;
    cells.push_back(std::move(j));
    tsv << cell.task << "\t" << to_string(cell.features) << "\t" << to_string(cell.classifier) << "\t" << cell.score
        << "\t" << cell.metrics.accuracy << "\t" << cell.metrics.average_class_accuracy << "\t"
        << cell.metrics.majority_rate << "\t" << cell.metrics.n << "\n";
  }
  const ClassificationMetrics& cm = t.cell("material", FeatureKind::autoencoder, ClassifierKind::deep).metrics;
  std::ostringstream conf;
  const std::vector<std::string>& names =
      t.cell("material", FeatureKind::autoencoder, ClassifierKind::deep).classes;
  conf << "true\\predicted";
  for (const auto& n : names) conf << "\t" << n;
  conf << "\n";
  for (int i = 0; i < cm.confusion.rows(); ++i) {
    conf << names[i];
    for (int j = 0; j < cm.confusion.cols(); ++j) conf << "\t" << cm.confusion(i, j);
    conf << "\n";
  }
  json prov = base_provenance(ctx);
  prov["dataset_digest"] = ds_digest;
  prov["autoencoder_digest"] = file_digest(ae_path(ctx));
  write_text(ctx.reports_dir() + "/perception.json", sealed_document("perception", prov, {{"cells", cells}}).dump(2) + "\n");
  write_text(ctx.reports_dir() + "/perception.tsv", tsv.str());
  write_text(ctx.reports_dir() + "/material_confusion.tsv", conf.str());
  return "eval-perception: " + std::to_string(t.cells.size()) + " cells -> " + ctx.reports_dir() + "/perception.json";
}

std::string cmd_eval_grasping(const CommandContext& ctx) {
  const RunConfig& c = ctx.config;
  const Models models = load_models(ctx);
  const std::vector<CatalogEntry> test = read_catalog(ctx.catalog_path()).split(Split::test);
  const GraspingProtocol protocol = c.grasping_protocol();
  const GraspingTable regrasp = evaluate_arms(test, models, regrasping_arms(c.gwos.t_max), protocol, c.context(),
                                              c.workspace);
  const GraspingTable gwos = evaluate_arms(test, models, gwos_arms(c.gwos.t_max), protocol, c.context(), c.workspace);

  const int n_objects = protocol.max_objects < 0 ? static_cast<int>(test.size())
                                                 : std::min<int>(protocol.max_objects, test.size());
  double analytic = 0.0;
  for (int i = 0; i < n_objects; ++i)
    analytic += oracle_initializer_success(test[i], c.workspace, c.sim, c.gwos.init) / n_objects;

  std::ostringstream tsv;
  tsv << "table\tarm\ttrials\tsuccesses\taccuracy\tgrasps\n";
  for (const auto& [name, table] : {std::pair{"regrasping", &regrasp}, std::pair{"gwos", &gwos}})
    for (const auto& a : table->arms)
      tsv << name << "\t" << a.name << "\t" << a.trials << "\t" << a.successes << "\t" << a.accuracy() << "\t"
          << a.grasps << "\n";
  json prov = base_provenance(ctx);
  prov["dataset_digest"] = verified_dataset_digest(ctx);
  prov["autoencoder_digest"] = file_digest(ae_path(ctx));
  prov["stability_digest"] = file_digest(stability_path(ctx));
  prov["policy_digest"] = file_digest(policy_path(ctx));
  const json payload{{"regrasping", arms_json(regrasp)},
                     {"gwos", arms_json(gwos)},
                     {"oracle_initializer_analytic", analytic}};
  write_text(ctx.reports_dir() + "/grasping.json", sealed_document("grasping", prov, payload).dump(2) + "\n");
  write_text(ctx.reports_dir() + "/grasping.tsv", tsv.str());
  return "eval-grasping: " + std::to_string(regrasp.arms.front().trials) + " trials per arm -> " + ctx.reports_dir() +
         "/grasping.json";
}

std::string cmd_report(const CommandContext& ctx) {
  const json ae = open_sealed(ctx.reports_dir() + "/autoencoder.json", "autoencoder");
  const json per = open_sealed(ctx.reports_dir() + "/perception.json", "perception");
  const json gr = open_sealed(ctx.reports_dir() + "/grasping.json", "grasping");
  const std::string ae_digest = ae.at("provenance").at("autoencoder_digest");
  for (const json* d : {&per, &gr})
    if (d->at("provenance").at("autoencoder_digest").get<std::string>() != ae_digest)
      throw ProvenanceError("reports descend from different autoencoders");

  std::ostringstream md;
  md << "# Results\n\n";
  md << "Config digest " << ae.at("provenance").at("config_digest").get<std::string>() << ", seed "
     << ae.at("provenance").at("seed") << ".\n\n";
  const json& curve = ae.at("payload");
  md << "## Autoencoder\n\n| split | final loss | constant-mean baseline |\n|---|---|---|\n";
  md << "| train | " << curve.at("train_loss").back().get<double>() << " | " << curve.at("baseline_train").get<double>()
     << " |\n";
  md << "| validation | " << curve.at("validation_loss").back().get<double>() << " | "
     << curve.at("baseline_validation").get<double>() << " |\n\n";

  for (const auto& [task, title] : {std::pair{"material", "Material recognition (average class accuracy, %)"},
                                     std::pair{"stability", "Grasp stability estimation (accuracy, %)"}}) {
    md << "## " << title << "\n\n| features | deep | linear_hinge | majority |\n|---|---|---|---|\n";
    for (const char* f : {"autoencoder", "handcrafted"}) {
      md << "| " << f;
      double majority = 0.0;
      for (const char* k : {"deep", "linear_hinge"})
        for (const auto& cell : per.at("payload").at("cells"))
          if (cell.at("task") == task && cell.at("features") == f && cell.at("classifier") == k) {
            md << " | " << pct(cell.at("score").get<double>());
            majority = cell.at("majority_rate").get<double>();
          }
      md << " | " << pct(majority) << " |\n";
    }
    md << "\n";
  }
  for (const auto& [key, title] : {std::pair{"regrasping", "Re-grasping with oracle location (accuracy, %)"},
                                    std::pair{"gwos", "Full pipeline (accuracy, %)"}}) {
    md << "## " << title << "\n\n| arm | trials | accuracy | grasps per trial |\n|---|---|---|---|\n";
    for (const auto& a : gr.at("payload").at(key)) {
      const int trials = a.at("trials").get<int>();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", trials ? a.at("grasps").get<double>() / trials : 0.0);
      md << "| " << a.at("name").get<std::string>() << " | " << trials << " | " << pct(a.at("accuracy").get<double>())
         << " | " << buf << " |\n";
    }
    md << "\n";
  }
  md << "Oracle initializer, analytic first-grasp success: "
     << pct(gr.at("payload").at("oracle_initializer_analytic").get<double>()) << "%\n";
  const std::string out = ctx.reports_dir() + "/report.md";
  write_text(out, md.str());
  return "report: -> " + out;
}

}  // namespace hg
