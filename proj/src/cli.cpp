//==============================================================================
// Copyright 2026 The nsk Authors.
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
//==============================================================================
#include "nsk/cli.hpp"

#include "nsk/dataset.hpp"
#include "nsk/encoder_head.hpp"
#include "nsk/manifest.hpp"
#include "nsk/metrics.hpp"
#include "nsk/naming.hpp"
#include "nsk/sampler.hpp"
#include "nsk/tensor.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <string>
//==============================================================================
namespace nsk::cli {
//==============================================================================
namespace {

using nlohmann::json;

struct Context {
  std::ostream& out;
  std::ostream& err;
  bool json = false;
  IoOptions io;
};

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(9) << v;
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kIo, "cannot open for writing: " + path);
  f << text;
  if (!f) throw Error(ErrorCode::kIo, "write failed: " + path);
}

void emit(Context& ctx, const json& report, const std::string& text) {
  if (ctx.json) {
    ctx.out << report.dump() << '\n';
  } else {
    ctx.out << text;
  }
}

MatrixXf load_matrix(const std::string& path, const Context& ctx) {
  const Tensor t = read_tensor(path, ctx.io);
  if (t.ndim() != 2) {
    throw Error(ErrorCode::kShapeMismatch, path + ": expected a 2-D tensor, got " +
                                               t.shape_string());
  }
  return t.matrix();
}

TokenSequence<float> load_sequence(const std::string& path, const Context& ctx,
                                   std::optional<Eigen::Index> semantic) {
  MatrixXf rows = load_matrix(path, ctx);
  if (rows.rows() != kSequenceLength) {
    throw Error(ErrorCode::kShapeMismatch,
                path + ": text embedding must have 77 rows, got " + std::to_string(rows.rows()));
  }
  return TokenSequence<float>::from_rows(std::move(rows), semantic);
}

void save_matrix(const MatrixXf& m, const std::string& path, const Context& ctx) {
  write_tensor(Tensor::from_eigen(m), path, ctx.io);
}

json shape_json(Eigen::Index r, Eigen::Index c) { return json::array({r, c}); }

/// Loads a feature manifest into a population, one record per row.
struct Population {
  MatrixXf rows;
  std::vector<std::string> names;
};

Population load_population(const std::string& path, const Context& ctx) {
  const auto m = Manifest::read(path);
  m.check_paths();
  Population pop;
  std::vector<Vector<float>> vecs;
  for (const auto& r : m.records()) {
    const Tensor t = m.load(r, ctx.io);
    if (t.ndim() != 1) {
      throw Error(ErrorCode::kShapeMismatch, "record " + r.id + ": features must be 1-D");
    }
    if (!vecs.empty() && static_cast<Eigen::Index>(t.size()) != vecs.front().size()) {
      throw Error(ErrorCode::kShapeMismatch, "record " + r.id + ": feature width differs");
    }
    vecs.push_back(t.vector());
    pop.names.push_back(r.name);
  }
  if (vecs.empty()) throw Error(ErrorCode::kInvalidArgument, path + ": empty population");
  pop.rows.resize(static_cast<Eigen::Index>(vecs.size()), vecs.front().size());
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    pop.rows.row(static_cast<Eigen::Index>(i)) = vecs[i].transpose();
  }
  return pop;
}

MatrixXf select_rows(const MatrixXf& m, const std::vector<Eigen::Index>& idx) {
  MatrixXf out(static_cast<Eigen::Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(idx[i]);
  return out;
}

std::vector<TrainSample<float>> load_training_set(const std::string& path, const Context& ctx) {
  const auto m = Manifest::read(path);
  m.check_paths();
  std::vector<std::string> order;
  std::map<std::string, std::array<std::optional<Tensor>, 3>> slots;
  for (const auto& r : m.records()) {
    int slot = -1;
    if (r.role == Role::kImageFeature768) slot = 0;
    if (r.role == Role::kImageFeature1280) slot = 1;
    if (r.role == Role::kNameEmbedding) slot = 2;
    if (slot < 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "record " + r.id + ": role " + std::string(to_string(r.role)) +
                      " not usable for training");
    }
    auto [it, fresh] = slots.try_emplace(r.name);
    if (fresh) order.push_back(r.name);
    if (it->second[static_cast<std::size_t>(slot)]) {
      throw Error(ErrorCode::kInvalidArgument, "sample " + r.name + " has a duplicate role");
    }
    it->second[static_cast<std::size_t>(slot)] = m.load(r, ctx.io);
  }
  std::vector<TrainSample<float>> samples;
  for (const auto& key : order) {
    const auto& s = slots.at(key);
    if (!s[0] || !s[1] || !s[2]) {
      throw Error(ErrorCode::kInvalidArgument, "sample " + key + " lacks one of its three roles");
    }
    samples.push_back({{s[0]->vector(), s[1]->vector()}, s[2]->matrix()});
    if (samples.back().target.cols() != samples.front().target.cols()) {
      throw Error(ErrorCode::kShapeMismatch, "sample " + key + ": target width differs");
    }
  }
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, path + ": no training samples");
  return samples;
}

std::string hex(Hash64 h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h.bits;
  return os.str();
}

int exit_code(const Error& e) { return e.is_io() ? kExitIo : kExitValidation; }

}  // namespace
//==============================================================================
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  Context ctx{out, err, false, {}};

  CLI::App app{"Name-embedding toolkit: manipulate, predict and inject identity embeddings"};
  app.name(argv.empty() ? "nsk" : argv.front());
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.add_flag("--json", ctx.json, "Emit machine-readable reports");
  app.add_flag("--allow-nonfinite", ctx.io.allow_nonfinite,
               "Accept NaN/Inf values when reading and writing tensors");

  std::function<void()> action;

  // inspect ------------------------------------------------------------------
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print dtype, shape, min, max and norm");
  inspect->add_option("file", inspect_path, "NSTF file")->required();
  inspect->callback([&] {
    action = [&] {
      const Tensor t = read_tensor(inspect_path, ctx.io);
      const auto v = t.vector();
      json r{{"file", inspect_path}, {"dtype", "f32"}, {"shape", t.shape()}};
      std::string text = "dtype\tf32\nshape\t" + t.shape_string() + "\n";
      if (v.size() > 0) {
        const double norm = v.cast<double>().norm();
        r["min"] = v.minCoeff();
        r["max"] = v.maxCoeff();
        r["norm"] = norm;
        text += "min\t" + num(v.minCoeff()) + "\nmax\t" + num(v.maxCoeff()) + "\nnorm\t" +
                num(norm) + "\n";
      } else {
        text += "min\tn/a\nmax\tn/a\nnorm\t0\n";
        r["norm"] = 0.0;
      }
      emit(ctx, r, text);
    };
  });

  // prepend ------------------------------------------------------------------
  std::string pp_name, pp_prompt, pp_out;
  std::optional<Eigen::Index> pp_semantic;
  auto* prepend = app.add_subcommand("prepend", "Insert a name embedding after the start token");
  prepend->add_option("--name", pp_name, "Name embedding (K x D)")->required();
  prepend->add_option("--prompt", pp_prompt, "Prompt text embedding (77 x D)")->required();
  prepend->add_option("--semantic-tokens", pp_semantic,
                      "Semantic rows after the start token (default: all)");
  prepend->add_option("--out", pp_out, "Output NSTF")->required();
  prepend->callback([&] {
    action = [&] {
      const auto seq = load_sequence(pp_prompt, ctx, pp_semantic);
      const auto name = load_matrix(pp_name, ctx);
      const auto result = name_prepend(name, seq);
      save_matrix(result.rows(), pp_out, ctx);
      emit(ctx, {{"command", "prepend"}, {"out", pp_out}, {"semantic", result.semantic_count()}},
           "wrote " + pp_out + "\n");
    };
  });

  // recalibrate --------------------------------------------------------------
  std::string rc_name, rc_mean, rc_out;
  double rc_delta = 5.0;
  double rc_eta = 80.0;
  bool rc_no_rescale = false;
  auto* recal = app.add_subcommand(
      "recalibrate", "mean + delta * (name - mean), then rescale to Frobenius norm eta");
  recal->add_option("--name", rc_name, "Name embedding")->required();
  recal->add_option("--mean", rc_mean, "Mean name embedding")->required();
  recal->add_option("--delta", rc_delta, "Guidance strength around the mean");
  recal->add_option("--eta", rc_eta, "Target Frobenius norm");
  recal->add_flag("--no-rescale", rc_no_rescale, "Skip the norm rescaling");
  recal->add_option("--out", rc_out, "Output NSTF")->required();
  recal->callback([&] {
    action = [&] {
      const auto name = load_matrix(rc_name, ctx);
      const auto mean = load_matrix(rc_mean, ctx);
      MatrixXf r = recalibrate(name, mean, static_cast<float>(rc_delta));
      if (!rc_no_rescale) r = rescale(r, static_cast<float>(rc_eta));
      save_matrix(r, rc_out, ctx);
      const double norm = r.cast<double>().norm();
      emit(ctx, {{"command", "recalibrate"}, {"out", rc_out}, {"norm", norm}},
           "wrote " + rc_out + " (norm " + num(norm) + ")\n");
    };
  });

  // interpolate --------------------------------------------------------------
  std::string ip_a, ip_b, ip_out;
  double ip_t = 0.5;
  auto* interp = app.add_subcommand("interpolate", "(1 - t) * a + t * b");
  interp->add_option("--a", ip_a, "First name embedding")->required();
  interp->add_option("--b", ip_b, "Second name embedding")->required();
  interp->add_option("--t", ip_t, "Interpolation ratio in [0, 1]");
  interp->add_option("--out", ip_out, "Output NSTF")->required();
  interp->callback([&] {
    action = [&] {
      const auto r = interpolate(load_matrix(ip_a, ctx), load_matrix(ip_b, ctx),
                                 static_cast<float>(ip_t));
      save_matrix(r, ip_out, ctx);
      emit(ctx, {{"command", "interpolate"}, {"out", ip_out}}, "wrote " + ip_out + "\n");
    };
  });

  // mean ---------------------------------------------------------------------
  std::vector<std::string> mn_inputs;
  std::string mn_manifest, mn_out;
  auto* mean_cmd = app.add_subcommand("mean", "Elementwise mean of name embeddings");
  mean_cmd->add_option("inputs", mn_inputs, "Name embedding files");
  mean_cmd->add_option("--manifest", mn_manifest, "Manifest of name-embedding-8xD records");
  mean_cmd->add_option("--out", mn_out, "Output NSTF")->required();
  mean_cmd->callback([&] {
    action = [&] {
      std::vector<MatrixXf> names;
      for (const auto& p : mn_inputs) names.push_back(load_matrix(p, ctx));
      if (!mn_manifest.empty()) {
        const auto m = Manifest::read(mn_manifest);
        m.check_paths();
        for (const auto& r : m.records()) {
          if (r.role != Role::kNameEmbedding) {
            throw Error(ErrorCode::kInvalidArgument,
                        "record " + r.id + " is not a name embedding");
          }
          names.push_back(m.load(r, ctx.io).matrix());
        }
      }
      const auto r = mean_name(names);
      save_matrix(r, mn_out, ctx);
      emit(ctx, {{"command", "mean"}, {"out", mn_out}, {"count", names.size()}},
           "wrote " + mn_out + " (mean of " + std::to_string(names.size()) + ")\n");
    };
  });

  // extract-name -------------------------------------------------------------
  std::string ex_text, ex_out;
  Eigen::Index ex_tokens = kNameTokens;
  auto* extract = app.add_subcommand(
      "extract-name", "Ground-truth name: the rows right after the start token");
  extract->add_option("--text", ex_text, "Name-only text embedding (77 x D)")->required();
  extract->add_option("--tokens", ex_tokens, "Name rows to keep");
  extract->add_option("--out", ex_out, "Output NSTF")->required();
  extract->callback([&] {
    action = [&] {
      const auto seq = TokenSequence<float>::from_rows(load_matrix(ex_text, ctx));
      save_matrix(extract_gt_name(seq, ex_tokens), ex_out, ctx);
      emit(ctx, {{"command", "extract-name"}, {"out", ex_out}}, "wrote " + ex_out + "\n");
    };
  });

  // train-head ---------------------------------------------------------------
  std::string tr_data, tr_out, tr_log, tr_resume;
  TrainConfig tr_cfg;
  Eigen::Index tr_hidden1 = 4096;
  Eigen::Index tr_hidden2 = 8192;
  auto* train_cmd = app.add_subcommand("train-head", "Train the image-to-name head with Adam");
  train_cmd->add_option("--data", tr_data,
                        "Manifest: per sample (name field) one image-feature-768, one "
                        "image-feature-1280 and one name-embedding-8xD record")
      ->required();
  train_cmd->add_option("--out", tr_out, "Checkpoint directory")->required();
  train_cmd->add_option("--log", tr_log, "Loss log (default: <out>/train.log)");
  train_cmd->add_option("--lr", tr_cfg.adam.learning_rate, "Adam learning rate");
  train_cmd->add_option("--beta1", tr_cfg.adam.beta1, "Adam beta1");
  train_cmd->add_option("--beta2", tr_cfg.adam.beta2, "Adam beta2");
  train_cmd->add_option("--epsilon", tr_cfg.adam.epsilon, "Adam epsilon");
  train_cmd->add_option("--batch-size", tr_cfg.batch_size, "Samples per step");
  train_cmd->add_option("--steps", tr_cfg.max_steps, "Optimizer steps");
  train_cmd->add_option("--seed", tr_cfg.seed, "Initialization and shuffling seed");
  train_cmd->add_option("--hidden1", tr_hidden1, "First hidden width");
  train_cmd->add_option("--hidden2", tr_hidden2, "Second hidden width");
  train_cmd->add_option("--resume", tr_resume, "Continue from a checkpoint directory");
  train_cmd->callback([&] {
    action = [&] {
      const auto samples = load_training_set(tr_data, ctx);
      const HeadProfile profile{768, 1280, tr_hidden1, tr_hidden2,
                                samples.front().target.rows(), samples.front().target.cols()};
      std::optional<Adam<float>> resume;
      std::optional<EncoderHead<float>> head;
      if (!tr_resume.empty()) {
        auto ckpt = load_checkpoint(tr_resume);
        if (!(ckpt.head.profile() == profile)) {
          throw Error(ErrorCode::kShapeMismatch, "checkpoint profile differs from data/flags");
        }
        if (ckpt.optimizer) {
          resume.emplace(tr_cfg.adam, ckpt.optimizer->first_moment(),
                         ckpt.optimizer->second_moment(), ckpt.optimizer->step_count());
        }
        head.emplace(std::move(ckpt.head));
      } else {
        head.emplace(EncoderHead<float>::initialize(profile, tr_cfg.seed));
      }
      if (tr_log.empty()) tr_log = (std::filesystem::path(tr_out) / "train.log").string();
      std::filesystem::create_directories(tr_out);
      std::ofstream log(tr_log, std::ios::binary | std::ios::trunc);
      if (!log) throw Error(ErrorCode::kIo, "cannot open log: " + tr_log);

      TrainConfig cfg = tr_cfg;
      cfg.seed = tr_cfg.seed ^ 0x9E3779B97F4A7C15ULL;  // shuffle stream
      const auto result = train(*std::move(head), std::span<const TrainSample<float>>(samples),
                                cfg, [&](std::size_t step, float loss) {
                                  log << step << '\t' << num(loss) << '\n';
                                },
                                std::move(resume));
      save_checkpoint(tr_out, result.final_head, &result.optimizer);
      if (result.best_parameters) {
        save_checkpoint(std::filesystem::path(tr_out) / "best",
                        EncoderHead<float>(profile, *result.best_parameters));
      }
      const double final_loss =
          result.loss_history.empty() ? 0.0 : static_cast<double>(result.loss_history.back());
      emit(ctx,
           {{"command", "train-head"}, {"steps", result.loss_history.size()},
            {"final_loss", final_loss}, {"best_loss", result.best_loss},
            {"best_step", result.best_step}},
           "trained " + std::to_string(result.loss_history.size()) + " steps, final loss " +
               num(final_loss) + ", best " + num(result.best_loss) + " at step " +
               std::to_string(result.best_step) + "\n");
    };
  });

  // predict-name -------------------------------------------------------------
  std::string pr_ckpt, pr_small, pr_large, pr_out;
  auto* predict = app.add_subcommand("predict-name", "Predict a name embedding from features");
  predict->add_option("--checkpoint", pr_ckpt, "Checkpoint directory")->required();
  predict->add_option("--small", pr_small, "768-d backbone feature")->required();
  predict->add_option("--large", pr_large, "1280-d backbone feature")->required();
  predict->add_option("--out", pr_out, "Output NSTF")->required();
  predict->callback([&] {
    action = [&] {
      const auto ckpt = load_checkpoint(pr_ckpt);
      const BackboneFeatures<float> f{read_tensor(pr_small, ctx.io).vector(),
                                      read_tensor(pr_large, ctx.io).vector()};
      save_matrix(ckpt.head.forward(f), pr_out, ctx);
      emit(ctx, {{"command", "predict-name"}, {"out", pr_out}}, "wrote " + pr_out + "\n");
    };
  });

  // sample -------------------------------------------------------------------
  std::string sm_name, sm_prompt, sm_null, sm_mean, sm_out, sm_denoiser = "projection";
  GuidanceConfig sm_cfg;
  std::size_t sm_steps = 100;
  std::uint64_t sm_seed = 0;
  std::uint64_t sm_denoiser_seed = 0;
  LatentShape sm_shape;
  std::optional<Eigen::Index> sm_semantic;
  auto* sample = app.add_subcommand("sample", "Identity-conditioned guided DDIM sampling");
  sample->add_option("--name", sm_name, "Predicted name embedding (8 x D)")->required();
  sample->add_option("--prompt", sm_prompt, "Prompt text embedding (77 x D)")->required();
  sample->add_option("--null", sm_null, "Null-text embedding (77 x D)")->required();
  sample->add_option("--mean", sm_mean, "Mean name embedding (8 x D)")->required();
  sample->add_option("--gamma", sm_cfg.gamma, "Classifier-free guidance scale");
  sample->add_option("--delta", sm_cfg.delta, "Name guidance strength");
  sample->add_option("--eta", sm_cfg.eta, "Name embedding Frobenius norm");
  sample->add_option("--steps", sm_steps, "DDIM steps");
  sample->add_option("--seed", sm_seed, "Seed for x_T");
  sample->add_option("--semantic-tokens", sm_semantic, "Semantic rows in the prompt");
  sample->add_option("--denoiser", sm_denoiser, "Toy noise predictor")
      ->check(CLI::IsMember({"projection", "zero", "linear"}));
  sample->add_option("--denoiser-seed", sm_denoiser_seed, "Seed of the toy predictor");
  sample->add_option("--latent-rows", sm_shape.rows, "State rows");
  sample->add_option("--latent-cols", sm_shape.cols, "State columns");
  sample->add_option("--out", sm_out, "Output NSTF (x_0)")->required();
  sample->callback([&] {
    action = [&] {
      const auto name = load_matrix(sm_name, ctx);
      const auto mean = load_matrix(sm_mean, ctx);
      const auto prompt = load_sequence(sm_prompt, ctx, sm_semantic);
      const auto null_seq = load_sequence(sm_null, ctx, std::nullopt);
      if (sm_shape.rows <= 0 || sm_shape.cols <= 0) {
        throw Error(ErrorCode::kInvalidArgument, "latent shape must be positive");
      }
      const auto sched = NoiseSchedule::linear(sm_steps);
      std::unique_ptr<Denoiser<float>> den;
      const Eigen::Index n = sm_shape.rows * sm_shape.cols;
      if (sm_denoiser == "zero") {
        den = std::make_unique<ZeroDenoiser<float>>();
      } else if (sm_denoiser == "linear") {
        den = std::make_unique<LinearDenoiser<float>>(0.1f * MatrixXf::Identity(n, n));
      } else {
        den = std::make_unique<ConditionProjectionDenoiser<float>>(n, prompt.dim(),
                                                                   sm_denoiser_seed);
      }
      const auto x0 = generate(name, prompt, null_seq, mean, sm_cfg, sched, *den, sm_seed,
                               sm_shape);
      save_matrix(x0, sm_out, ctx);
      emit(ctx, {{"command", "sample"}, {"out", sm_out}, {"shape", shape_json(x0.rows(), x0.cols())}},
           "wrote " + sm_out + "\n");
    };
  });

  // hash ---------------------------------------------------------------------
  std::vector<std::string> hs_inputs;
  std::string hs_out;
  auto* hash = app.add_subcommand("hash", "64-bit average hash of 8x8 luminance grids");
  hash->add_option("inputs", hs_inputs, "8x8 NSTF grids")->required();
  hash->add_option("--out", hs_out, "Write `hash<TAB>path` lines here as well");
  hash->callback([&] {
    action = [&] {
      std::string text;
      json arr = json::array();
      for (const auto& p : hs_inputs) {
        const Tensor t = read_tensor(p, ctx.io);
        if (t.shape() != Tensor::Shape{8, 8}) {
          throw Error(ErrorCode::kShapeMismatch, p + ": expected [8, 8], got " + t.shape_string());
        }
        const auto h = hex(average_hash(t.matrix()));
        text += h + "\t" + p + "\n";
        arr.push_back({{"file", p}, {"hash", h}});
      }
      if (!hs_out.empty()) write_text(hs_out, text);
      emit(ctx, arr, text);
    };
  });

  // dedup --------------------------------------------------------------------
  std::string dd_corpus, dd_out;
  int dd_max_hamming = 0;
  auto* dedup_cmd = app.add_subcommand("dedup", "Greedy average-hash deduplication of a corpus");
  dedup_cmd->add_option("--corpus", dd_corpus, "Corpus manifest")->required();
  dedup_cmd->add_option("--max-hamming", dd_max_hamming, "Maximum Hamming distance of duplicates")
      ->check(CLI::NonNegativeNumber);
  dedup_cmd->add_option("--out", dd_out, "Decisions TSV")->required();
  dedup_cmd->callback([&] {
    action = [&] {
      const auto corpus = read_corpus(dd_corpus, ctx.io);
      std::vector<Hash64> hashes;
      for (const auto& img : corpus) hashes.push_back(average_hash(img.gray));
      const auto d = dedup(hashes, dd_max_hamming);
      std::string text = "image_id\thash\tdecision\tduplicate_of\n";
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        text += corpus[i].image_id + "\t" + hex(hashes[i]) + "\t" +
                (d.duplicate_of[i] ? "dropped\t" + corpus[*d.duplicate_of[i]].image_id
                                   : std::string("kept\t")) +
                "\n";
      }
      write_text(dd_out, text);
      emit(ctx, {{"command", "dedup"}, {"kept", d.kept.size()}, {"total", corpus.size()}},
           "kept " + std::to_string(d.kept.size()) + " of " + std::to_string(corpus.size()) +
               "\n");
    };
  });

  // pipeline -----------------------------------------------------------------
  std::string pl_corpus, pl_text, pl_portraits, pl_out, pl_audit;
  PipelineConfig pl_cfg;
  double pl_tolerance = 0.6;
  bool pl_no_dedup = false;
  auto* pipeline = app.add_subcommand("pipeline", "Build an identity-name dataset from a corpus");
  pipeline->add_option("--corpus", pl_corpus, "Corpus manifest")->required();
  pipeline->add_option("--text-embeddings", pl_text,
                       "Manifest of text-embedding-77xD records keyed by name")
      ->required();
  pipeline->add_option("--portraits", pl_portraits,
                       "Manifest of face-embedding records of generated portraits, keyed by name")
      ->required();
  pipeline->add_option("--match-tolerance", pl_tolerance,
                       "Face match threshold on Euclidean distance");
  pipeline->add_option("--min-images", pl_cfg.min_images, "Minimum kept images per name");
  pipeline->add_option("--portrait-count", pl_cfg.portraits, "Portraits generated per name");
  pipeline->add_option("--max-hamming", pl_cfg.max_hamming, "Dedup Hamming threshold")
      ->check(CLI::NonNegativeNumber);
  pipeline->add_flag("--no-dedup", pl_no_dedup, "Disable hash deduplication");
  pipeline->add_option("--out", pl_out, "Output directory")->required();
  pipeline->add_option("--audit", pl_audit, "Audit log path (default: <out>/audit.tsv)");
  pipeline->callback([&] {
    action = [&] {
      const auto corpus = read_corpus(pl_corpus, ctx.io);
      const auto text = Manifest::read(pl_text);
      const auto portraits = Manifest::read(pl_portraits);
      text.check_paths();
      portraits.check_paths();
      OracleSet o{oracles::capitalized_names, oracles::collapse_whitespace,
                  oracles::manifest_text_encoder(text), oracles::manifest_portraits(portraits),
                  oracles::euclidean_matcher(pl_tolerance)};
      pl_cfg.dedup = !pl_no_dedup;
      const auto result = run_pipeline(corpus, o, pl_cfg);

      const std::filesystem::path dir(pl_out);
      std::filesystem::create_directories(dir / "names");
      Manifest names;
      std::string images = "name\timage_id\n";
      for (std::size_t i = 0; i < result.records.size(); ++i) {
        const auto& rec = result.records[i];
        std::ostringstream id;
        id << "r" << std::setw(5) << std::setfill('0') << i;
        const std::string file = "names/" + id.str() + ".nstf";
        write_tensor(Tensor::from_eigen(*rec.name_embedding), dir / file, ctx.io);
        names.add({id.str(), rec.name, Role::kNameEmbedding, file});
        for (const auto& img : rec.images) {
          if (img.kept) images += rec.name + "\t" + img.image_id + "\n";
        }
      }
      names.write(dir / "names.tsv");
      write_text((dir / "images.tsv").string(), images);
      if (pl_audit.empty()) pl_audit = (dir / "audit.tsv").string();
      write_text(pl_audit, result.audit.serialize());

      const auto counts = result.audit.step_counts();
      json steps = json::array();
      std::string summary;
      for (int s = 1; s <= 8; ++s) {
        const auto& c = counts[static_cast<std::size_t>(s)];
        steps.push_back({{"step", s}, {"kept", c.kept}, {"dropped", c.dropped}});
        summary += "step " + std::to_string(s) + "\tkept " + std::to_string(c.kept) +
                   "\tdropped " + std::to_string(c.dropped) + "\n";
      }
      emit(ctx, {{"command", "pipeline"}, {"records", result.records.size()}, {"steps", steps}},
           summary + "records\t" + std::to_string(result.records.size()) + "\n");
    };
  });

  // eval ---------------------------------------------------------------------
  std::string ev_text, ev_images, ev_reference, ev_faces, ev_out;
  std::uint64_t ev_seed = 0;
  bool ev_per_task = false;
  auto* eval = app.add_subcommand("eval", "CLIP-TI, FID and identity consistency");
  eval->add_option("--text", ev_text, "Prompt text features (name field = prompt)");
  eval->add_option("--images", ev_images,
                   "Generated image features, paired row-by-row with --text");
  eval->add_option("--reference", ev_reference,
                   "Reference image features for FID (name field = prompt)");
  eval->add_option("--faces", ev_faces, "Face embeddings of the generated set");
  eval->add_option("--seed", ev_seed, "Seed for identity-consistency partner draws");
  eval->add_flag("--per-task", ev_per_task, "Add Style/Scene/Emotion/Action breakdown");
  eval->add_option("--out", ev_out, "Also write the report here");
  eval->callback([&] {
    action = [&] {
      json r = json::object();
      std::string text;
      auto line = [&](const std::string& key, double v) {
        text += key + "\t" + num(v) + "\n";
      };
      std::optional<Population> images;
      if (!ev_images.empty()) images = load_population(ev_images, ctx);

      auto by_task = [](const std::vector<std::string>& names) {
        std::map<std::string, std::vector<Eigen::Index>> groups;
        for (std::size_t i = 0; i < names.size(); ++i) {
          if (auto t = task_for_prompt(names[i])) {
            groups[std::string(*t)].push_back(static_cast<Eigen::Index>(i));
          }
        }
        return groups;
      };

      if (!ev_text.empty()) {
        if (!images) throw Error(ErrorCode::kInvalidArgument, "--text needs --images");
        const auto txt = load_population(ev_text, ctx);
        const double v = clip_ti(txt.rows, images->rows);
        r["clip_ti"] = v;
        line("clip_ti", v);
        if (ev_per_task) {
          const auto groups = by_task(txt.names);
          for (auto task : kTaskNames) {
            const auto it = groups.find(std::string(task));
            if (it == groups.end()) continue;
            const double tv = clip_ti(select_rows(txt.rows, it->second),
                                      select_rows(images->rows, it->second));
            r["per_task"][std::string(task)]["clip_ti"] = tv;
            line("clip_ti." + std::string(task), tv);
          }
        }
      }
      if (!ev_reference.empty()) {
        if (!images) throw Error(ErrorCode::kInvalidArgument, "--reference needs --images");
        const auto ref = load_population(ev_reference, ctx);
        if (fid_undersampled(images->rows, ref.rows)) {
          ctx.err << "warning: fewer samples than feature width + 1; FID covariance is rank "
                     "deficient\n";
        }
        const double v = fid(images->rows, ref.rows);
        r["fid"] = v;
        line("fid", v);
        if (ev_per_task) {
          const auto gen_groups = by_task(images->names);
          const auto ref_groups = by_task(ref.names);
          for (auto task : kTaskNames) {
            const auto g = gen_groups.find(std::string(task));
            const auto f = ref_groups.find(std::string(task));
            if (g == gen_groups.end() || f == ref_groups.end()) continue;
            if (g->second.size() < 2 || f->second.size() < 2) continue;
            const double tv = fid(select_rows(images->rows, g->second),
                                  select_rows(ref.rows, f->second));
            r["per_task"][std::string(task)]["fid"] = tv;
            line("fid." + std::string(task), tv);
          }
        }
      }
      if (!ev_faces.empty()) {
        const auto faces = load_population(ev_faces, ctx);
        const double v = id_consistency(faces.rows, ev_seed);
        r["id_consistency"] = v;
        line("id_consistency", v);
      }
      if (r.empty()) throw Error(ErrorCode::kInvalidArgument, "eval: no inputs given");
      if (!ev_out.empty()) write_text(ev_out, ctx.json ? r.dump() + "\n" : text);
      emit(ctx, r, text);
    };
  });

  // --------------------------------------------------------------------------
  std::vector<const char*> cargv;
  cargv.reserve(argv.size());
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  if (const char* threads = std::getenv("NSK_THREADS")) {
    char* end = nullptr;
    const long n = std::strtol(threads, &end, 10);
    if (end == threads || *end != '\0' || n < 1) {
      err << "error: NSK_THREADS must be a positive integer\n";
      return kExitValidation;
    }
    Eigen::setNbThreads(static_cast<int>(n));
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error [Io]: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
}
//==============================================================================
}  // namespace nsk::cli
//==============================================================================
