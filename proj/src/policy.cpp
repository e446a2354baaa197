#include "sbrl/policy.hpp"

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

std::vector<int> parse_sizes(const std::string& text,
                             const std::vector<int>& def) {
  std::istringstream in(text);
  std::vector<int> out;
  int v = 0;
  while (in >> v) out.push_back(v);
  return out.empty() ? def : out;
}

std::vector<int> layer_spec(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  if (out > 0) sizes.push_back(out);
  return sizes;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated policy stream");
  return v;
}

void write_sizes(std::ostream& out, const std::vector<int>& sizes) {
  write_pod<int32_t>(out, static_cast<int32_t>(sizes.size()));
  for (int s : sizes) write_pod<int32_t>(out, s);
}

std::vector<int> read_sizes(std::istream& in) {
  const int32_t n = read_pod<int32_t>(in);
  if (n < 0 || n > 1024) throw IoError("corrupt policy stream");
  std::vector<int> sizes(n);
  for (int32_t i = 0; i < n; ++i) sizes[i] = read_pod<int32_t>(in);
  return sizes;
}

}  // namespace

PolicyConfig PolicyConfig::from_config(const Config& cfg) {
  PolicyConfig p;
  p.extractor_hidden = parse_sizes(
      cfg.get_string("policy.extractor_hidden", ""), p.extractor_hidden);
  p.policy_hidden = parse_sizes(cfg.get_string("policy.policy_hidden", ""),
                                p.policy_hidden);
  p.value_hidden =
      parse_sizes(cfg.get_string("policy.value_hidden", ""), p.value_hidden);
  p.predictor_hidden = parse_sizes(
      cfg.get_string("policy.predictor_hidden", ""), p.predictor_hidden);
  p.bezier_degree = cfg.get_int("policy.bezier_degree", p.bezier_degree);
  p.horizon = cfg.get_int("policy.horizon", p.horizon);
  p.log_std_init = cfg.get_double("policy.log_std_init", p.log_std_init);
  if (p.bezier_degree < 1) throw ConfigError("bezier_degree must be >= 1");
  if (p.horizon < 1) throw ConfigError("horizon must be >= 1");
  return p;
}

PolicyBundle::PolicyBundle(const PolicyConfig& cfg, std::mt19937_64& rng)
    : cfg_(cfg) {
  if (cfg_.extractor_hidden.empty())
    throw ConfigError("extractor needs at least one hidden layer");
  extractor_ = DenseNetwork(
      layer_spec(kObservationSize, cfg_.extractor_hidden, 0),
      OutputActivation::kRelu);
  const int latent = cfg_.extractor_hidden.back();
  policy_ = DenseNetwork(layer_spec(latent, cfg_.policy_hidden, kActionSize));
  value_ = DenseNetwork(layer_spec(latent, cfg_.value_hidden, 1));
  predictor_ = DenseNetwork(layer_spec(
      latent, cfg_.predictor_hidden, BezierParams::packed_size(cfg_.bezier_degree)));
  extractor_.init_orthogonal(rng, std::sqrt(2.0), std::sqrt(2.0));
  policy_.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  value_.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  predictor_.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  log_std_ = Eigen::VectorXd::Constant(kActionSize, cfg_.log_std_init);
}

PolicyBundle::ActResult PolicyBundle::act(const Eigen::VectorXd& obs,
                                          std::mt19937_64& rng) const {
  const Eigen::VectorXd latent = extractor_.forward(obs);
  ActResult r;
  const Eigen::VectorXd mean = policy_.forward(latent);
  r.action = gaussian_sample(mean, log_std_, rng);
  r.log_prob = gaussian_log_prob(mean, log_std_, r.action);
  r.value = value_.forward(latent)(0);
  return r;
}

Eigen::Vector2d PolicyBundle::act_mean(const Eigen::VectorXd& obs) const {
  return policy_.forward(extractor_.forward(obs));
}

double PolicyBundle::value_of(const Eigen::VectorXd& obs) const {
  return value_.forward(extractor_.forward(obs))(0);
}

Eigen::VectorXd PolicyBundle::predict_raw(const Eigen::VectorXd& obs) const {
  return predictor_.forward(extractor_.forward(obs));
}

void PolicyBundle::forward_all(const Eigen::MatrixXd& obs,
                               ForwardPass* fp) const {
  fp->latent = extractor_.forward(obs, &fp->extractor);
  fp->mean = policy_.forward(fp->latent, &fp->policy);
  fp->values = value_.forward(fp->latent, &fp->value);
  fp->pred_raw = predictor_.forward(fp->latent, &fp->predictor);
}

void PolicyBundle::backward_all(const ForwardPass& fp,
                                const Eigen::MatrixXd& d_mean,
                                const Eigen::MatrixXd& d_values,
                                const Eigen::MatrixXd& d_pred_raw,
                                const Eigen::VectorXd& d_log_std,
                                Eigen::VectorXd* grad) const {
  const long n = fp.latent.rows();
  Eigen::MatrixXd d_latent = Eigen::MatrixXd::Zero(n, fp.latent.cols());
  DenseNetwork::Grads gp, gv, gd, ge;
  if (d_mean.size() > 0) d_latent += policy_.backward(fp.policy, d_mean, &gp);
  if (d_values.size() > 0)
    d_latent += value_.backward(fp.value, d_values, &gv);
  if (d_pred_raw.size() > 0)
    d_latent += predictor_.backward(fp.predictor, d_pred_raw, &gd);
  extractor_.backward(fp.extractor, d_latent, &ge);

  if (gp.empty()) gp = policy_.zero_grads();
  if (gv.empty()) gv = value_.zero_grads();
  if (gd.empty()) gd = predictor_.zero_grads();

  int off = 0;
  DenseNetwork::flatten_grads(ge, grad, off);
  off += extractor_.num_params();
  DenseNetwork::flatten_grads(gp, grad, off);
  off += policy_.num_params();
  DenseNetwork::flatten_grads(gv, grad, off);
  off += value_.num_params();
  DenseNetwork::flatten_grads(gd, grad, off);
  off += predictor_.num_params();
  if (d_log_std.size() == kActionSize)
    grad->segment(off, kActionSize) += d_log_std;
}

void PolicyBundle::backward_predictor_head(const ForwardPass& fp,
                                           const Eigen::MatrixXd& d_pred_raw,
                                           Eigen::VectorXd* grad) const {
  DenseNetwork::Grads gd;
  predictor_.backward(fp.predictor, d_pred_raw, &gd);
  DenseNetwork::flatten_grads(gd, grad, 0);
}

int PolicyBundle::num_params() const {
  return extractor_.num_params() + policy_.num_params() + value_.num_params() +
         predictor_.num_params() + kActionSize;
}

int PolicyBundle::predictor_param_offset() const {
  return extractor_.num_params() + policy_.num_params() + value_.num_params();
}

Eigen::VectorXd PolicyBundle::get_params() const {
  Eigen::VectorXd flat(num_params());
  int off = 0;
  extractor_.get_params(&flat, off);
  off += extractor_.num_params();
  policy_.get_params(&flat, off);
  off += policy_.num_params();
  value_.get_params(&flat, off);
  off += value_.num_params();
  predictor_.get_params(&flat, off);
  off += predictor_.num_params();
  flat.segment(off, kActionSize) = log_std_;
  return flat;
}

void PolicyBundle::set_params(const Eigen::VectorXd& flat) {
  if (flat.size() != num_params())
    throw ShapeMismatch("flat parameter size mismatch");
  int off = 0;
  extractor_.set_params(flat, off);
  off += extractor_.num_params();
  policy_.set_params(flat, off);
  off += policy_.num_params();
  value_.set_params(flat, off);
  off += value_.num_params();
  predictor_.set_params(flat, off);
  off += predictor_.num_params();
  log_std_ = flat.segment(off, kActionSize);
}

void PolicyBundle::save(std::ostream& out) const {
  write_pod<uint32_t>(out, 0x53425031u);  // "SBP1"
  write_sizes(out, cfg_.extractor_hidden);
  write_sizes(out, cfg_.policy_hidden);
  write_sizes(out, cfg_.value_hidden);
  write_sizes(out, cfg_.predictor_hidden);
  write_pod<int32_t>(out, cfg_.bezier_degree);
  write_pod<int32_t>(out, cfg_.horizon);
  write_pod<double>(out, cfg_.log_std_init);
  const Eigen::VectorXd flat = get_params();
  write_pod<int64_t>(out, flat.size());
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw IoError("failed to write policy");
}

PolicyBundle PolicyBundle::load(std::istream& in) {
  if (read_pod<uint32_t>(in) != 0x53425031u)
    throw IoError("not a policy stream");
  PolicyConfig cfg;
  cfg.extractor_hidden = read_sizes(in);
  cfg.policy_hidden = read_sizes(in);
  cfg.value_hidden = read_sizes(in);
  cfg.predictor_hidden = read_sizes(in);
  cfg.bezier_degree = read_pod<int32_t>(in);
  cfg.horizon = read_pod<int32_t>(in);
  cfg.log_std_init = read_pod<double>(in);
  std::mt19937_64 rng(0);
  PolicyBundle bundle(cfg, rng);
  const int64_t n = read_pod<int64_t>(in);
  if (n != bundle.num_params()) throw IoError("policy size mismatch");
  Eigen::VectorXd flat(n);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("truncated policy stream");
  bundle.set_params(flat);
  return bundle;
}

}  // namespace sbrl
