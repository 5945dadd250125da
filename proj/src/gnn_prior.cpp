#include "xlmimo/gnn_prior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace xlmimo {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Dense dense_zeros(Eigen::Index out, Eigen::Index in) { return {RealMatrix::Zero(out, in), RealMatrix::Zero(out, 1)}; }

void glorot_fill(RealMatrix& w, Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-limit, limit);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Rows of x pushed through a dense layer: x w^T + 1 b^T.
RealMatrix affine(const RealMatrix& x, const Dense& layer) {
  RealMatrix y = x * layer.w.transpose();
  y.rowwise() += layer.b.col(0).transpose();
  return y;
}

// First propagation layer split as A u_n + B u_k + C f_nk + b: pa = u A^T, pb = u B^T.
struct RoundFirstLayer {
  RowMat pa;
  RowMat pb;
  Eigen::RowVectorXd c0;
  Eigen::RowVectorXd cst;
};

RoundFirstLayer first_layer(const RealMatrix& u, const GraphAttributes& attrs, const GnnParams& p) {
  const Eigen::Index nu = p.dims.n_u;
  RoundFirstLayer f;
  f.pa = u * p.prop1.w.leftCols(nu).transpose();
  f.pb = u * p.prop1.w.middleCols(nu, nu).transpose();
  f.c0 = p.prop1.w.col(2 * nu).transpose();
  f.cst = (p.prop1.w.col(2 * nu + 1) * attrs.beta + p.prop1.w.col(2 * nu + 2) * attrs.zeta + p.prop1.b.col(0))
              .transpose();
  return f;
}

// Post-ReLU first hidden layer for every edge arriving at `node`.
void edge_hidden(const RoundFirstLayer& f, const GraphAttributes& attrs, Eigen::Index node, RowMat& out) {
  const Eigen::Index begin = attrs.offset[node];
  const Eigen::Index count = attrs.offset[node + 1] - begin;
  out.resize(count, f.pa.cols());
  const Eigen::RowVectorXd base = f.pa.row(node) + f.cst;
  for (Eigen::Index j = 0; j < count; ++j) {
    const Eigen::Index k = attrs.neighbor[begin + j];
    out.row(j) = (base + f.pb.row(k) + attrs.edge_first(node, k) * f.c0).cwiseMax(0.0);
  }
}

// Per-edge activations are not stored; the backward pass recomputes them one
// receiving node at a time.
struct RoundTape {
  RealMatrix u_in;
  RoundFirstLayer first;
  RealMatrix sum2;  // nodes x n_h2, per-node sum of h2 rows
  RealMatrix x;     // GRU input [S, a]
  RealMatrix g_prev, r, z, cand, gh_n, g_out;
};

struct ReadTape {
  RealMatrix u, a1, a2;
  RealVector o;
};

struct LayerTape {
  GraphAttributes attrs;
  bool initialized_here = false;
  std::vector<RoundTape> rounds;
  ReadTape read;
};

struct UnrollTape {
  std::vector<LayerTape> layers;
  PosteriorState final_post;
};

HiddenState round_impl(const HiddenState& state, const GraphAttributes& attrs, const GnnParams& p, RoundTape* tape) {
  const Eigen::Index n = attrs.nodes();
  const Eigen::Index nu = p.dims.n_u;
  const Eigen::Index h = p.dims.n_h1;

  const RoundFirstLayer first = first_layer(state.u, attrs, p);
  const RowMat w2t = p.prop2.w.transpose();
  const Eigen::RowVectorXd b2 = p.prop2.b.col(0).transpose();
  RealMatrix sum2 = RealMatrix::Zero(n, p.dims.n_h2);
  RealVector degree(n);
  RowMat h1;
  RowMat h2;
  for (Eigen::Index node = 0; node < n; ++node) {
    const Eigen::Index count = attrs.offset[node + 1] - attrs.offset[node];
    degree(node) = static_cast<double>(count);
    if (count == 0) continue;
    edge_hidden(first, attrs, node, h1);
    h2.noalias() = h1 * w2t;
    h2.rowwise() += b2;
    sum2.row(node) = h2.cwiseMax(0.0).colwise().sum();
  }
  RealMatrix s = sum2 * p.prop3.w.transpose();
  s += degree * p.prop3.b.col(0).transpose();

  RealMatrix x(n, nu + kNodeAttrs);
  x.leftCols(nu) = s;
  x.rightCols(kNodeAttrs) = attrs.node;

  RealMatrix gi = x * p.gru.w_ih.transpose();
  gi.rowwise() += p.gru.b_ih.col(0).transpose();
  RealMatrix gh = state.g * p.gru.w_hh.transpose();
  gh.rowwise() += p.gru.b_hh.col(0).transpose();

  RealMatrix r = (gi.leftCols(h) + gh.leftCols(h)).unaryExpr(&sigmoid);
  RealMatrix z = (gi.middleCols(h, h) + gh.middleCols(h, h)).unaryExpr(&sigmoid);
  RealMatrix gh_n = gh.rightCols(h);
  RealMatrix cand = (gi.rightCols(h).array() + r.array() * gh_n.array()).tanh().matrix();

  HiddenState out;
  out.g = ((1.0 - z.array()) * cand.array() + z.array() * state.g.array()).matrix();
  out.u = affine(out.g, p.out_map);

  if (tape != nullptr) {
    tape->u_in = state.u;
    tape->first = first;
    tape->sum2 = std::move(sum2);
    tape->x = std::move(x);
    tape->g_prev = state.g;
    tape->r = std::move(r);
    tape->z = std::move(z);
    tape->cand = std::move(cand);
    tape->gh_n = std::move(gh_n);
    tape->g_out = out.g;
  }
  return out;
}

RealVector readout_impl(const HiddenState& state, const GnnParams& p, ReadTape* tape) {
  RealMatrix a1 = affine(state.u, p.read1).cwiseMax(0.0);
  RealMatrix a2 = affine(a1, p.read2).cwiseMax(0.0);
  RealVector o = affine(a2, p.read3).col(0);
  RealVector gamma = o.unaryExpr([](double v) { return kGammaClamp.apply(std::max(v, 0.0)); });
  if (tape != nullptr) {
    tape->u = state.u;
    tape->a1 = std::move(a1);
    tape->a2 = std::move(a2);
    tape->o = std::move(o);
  }
  return gamma;
}

void dense_backward(const RealMatrix& d_out, const RealMatrix& in, Dense& grad) {
  grad.w.noalias() += d_out.transpose() * in;
  grad.b.col(0) += d_out.colwise().sum().transpose();
}

// Returns d/du given d/dgamma.
RealMatrix readout_backward(const RealVector& d_gamma, const ReadTape& t, const GnnParams& p, GnnParams& g) {
  RealMatrix d_o(d_gamma.size(), 1);
  for (Eigen::Index i = 0; i < d_gamma.size(); ++i) {
    const bool pass = t.o(i) > kGammaClamp.lo && t.o(i) < kGammaClamp.hi;
    d_o(i, 0) = pass ? d_gamma(i) : 0.0;
  }
  dense_backward(d_o, t.a2, g.read3);
  RealMatrix d2 = ((d_o * p.read3.w).array() * (t.a2.array() > 0.0).cast<double>()).matrix();
  dense_backward(d2, t.a1, g.read2);
  RealMatrix d1 = ((d2 * p.read2.w).array() * (t.a1.array() > 0.0).cast<double>()).matrix();
  dense_backward(d1, t.u, g.read1);
  return d1 * p.read1.w;
}

// Backward through one message round. d_u and d_g hold the gradient w.r.t. the round's
// output state on entry and w.r.t. its input state on exit; d_node accumulates the
// gradient w.r.t. the node attributes.
void round_backward(const RoundTape& t, const GraphAttributes& attrs, const GnnParams& p, GnnParams& g,
                    RealMatrix& d_u, RealMatrix& d_g, RealMatrix& d_node) {
  const Eigen::Index n = attrs.nodes();
  const Eigen::Index nu = p.dims.n_u;
  const Eigen::Index h = p.dims.n_h1;

  dense_backward(d_u, t.g_out, g.out_map);
  const RealMatrix dg_out = d_g + d_u * p.out_map.w;

  // GRU.
  const auto z = t.z.array();
  const auto r = t.r.array();
  const auto cand = t.cand.array();
  const RealMatrix dz = (dg_out.array() * (t.g_prev.array() - cand)).matrix();
  const RealMatrix dcand = (dg_out.array() * (1.0 - z)).matrix();
  const RealMatrix dan = (dcand.array() * (1.0 - cand * cand)).matrix();
  const RealMatrix dr = (dan.array() * t.gh_n.array()).matrix();
  const RealMatrix dar = (dr.array() * r * (1.0 - r)).matrix();
  const RealMatrix daz = (dz.array() * z * (1.0 - z)).matrix();

  RealMatrix dgi(n, 3 * h);
  dgi.leftCols(h) = dar;
  dgi.middleCols(h, h) = daz;
  dgi.rightCols(h) = dan;
  RealMatrix dgh(n, 3 * h);
  dgh.leftCols(h) = dar;
  dgh.middleCols(h, h) = daz;
  dgh.rightCols(h) = (dan.array() * r).matrix();

  g.gru.w_ih.noalias() += dgi.transpose() * t.x;
  g.gru.b_ih.col(0) += dgi.colwise().sum().transpose();
  g.gru.w_hh.noalias() += dgh.transpose() * t.g_prev;
  g.gru.b_hh.col(0) += dgh.colwise().sum().transpose();

  const RealMatrix dx = dgi * p.gru.w_ih;
  RealMatrix dg_prev = (dg_out.array() * z).matrix() + dgh * p.gru.w_hh;
  d_node += dx.rightCols(kNodeAttrs);
  const RealMatrix ds = dx.leftCols(nu);

  // Third propagation layer, applied after the per-node sum.
  g.prop3.w.noalias() += ds.transpose() * t.sum2;
  RealVector degree(n);
  for (Eigen::Index node = 0; node < n; ++node) {
    degree(node) = static_cast<double>(attrs.offset[node + 1] - attrs.offset[node]);
  }
  g.prop3.b.col(0) += ds.transpose() * degree;
  const RealMatrix dsum2 = ds * p.prop3.w;

  const RowMat w2t = p.prop2.w.transpose();
  const RowMat w2 = p.prop2.w;
  const Eigen::RowVectorXd b2 = p.prop2.b.col(0).transpose();
  RowMat dpa = RowMat::Zero(n, p.dims.n_h1);
  RowMat dpb = RowMat::Zero(n, p.dims.n_h1);
  Eigen::RowVectorXd dc0 = Eigen::RowVectorXd::Zero(p.dims.n_h1);
  RealMatrix gw2 = RealMatrix::Zero(p.dims.n_h2, p.dims.n_h1);
  Eigen::RowVectorXd gb2 = Eigen::RowVectorXd::Zero(p.dims.n_h2);
  RowMat h1;
  RowMat h2;
  RowMat dpre2;
  RowMat dpre1;
  Eigen::VectorXd e_first;
  for (Eigen::Index node = 0; node < n; ++node) {
    const Eigen::Index begin = attrs.offset[node];
    const Eigen::Index count = attrs.offset[node + 1] - begin;
    if (count == 0) continue;
    edge_hidden(t.first, attrs, node, h1);
    h2.noalias() = h1 * w2t;
    h2.rowwise() += b2;
    dpre2 = (h2.array() > 0.0).cast<double>().matrix();
    dpre2.array().rowwise() *= dsum2.row(node).array();
    gw2.noalias() += dpre2.transpose() * h1;
    gb2 += dpre2.colwise().sum();
    dpre1.noalias() = dpre2 * w2;
    dpre1.array() *= (h1.array() > 0.0).cast<double>();
    dpa.row(node) += dpre1.colwise().sum();
    e_first.resize(count);
    for (Eigen::Index j = 0; j < count; ++j) {
      const Eigen::Index k = attrs.neighbor[begin + j];
      dpb.row(k) += dpre1.row(j);
      e_first(j) = attrs.edge_first(node, k);
    }
    dc0.noalias() += e_first.transpose() * dpre1;
  }
  g.prop2.w += gw2;
  g.prop2.b.col(0) += gb2.transpose();

  const RealVector dcst = dpa.colwise().sum().transpose();
  g.prop1.w.leftCols(nu).noalias() += dpa.transpose() * t.u_in;
  g.prop1.w.middleCols(nu, nu).noalias() += dpb.transpose() * t.u_in;
  g.prop1.w.col(2 * nu) += dc0.transpose();
  g.prop1.w.col(2 * nu + 1) += attrs.beta * dcst;
  g.prop1.w.col(2 * nu + 2) += attrs.zeta * dcst;
  g.prop1.b.col(0) += dcst;

  d_u = dpa * p.prop1.w.leftCols(nu) + dpb * p.prop1.w.middleCols(nu, nu);
  d_g = std::move(dg_prev);
}

UnrollResult forward_impl(const SparseProblem& prob, const GnnParams& params, const UnrollOptions& opts,
                          const std::vector<double>* frozen_zeta, UnrollTape* tape) {
  if (opts.layers < 1) throw Error(ErrorKind::InvalidParameter, "need at least one SBL-GNN layer");
  if (opts.gnn.rounds < 1) throw Error(ErrorKind::InvalidParameter, "need at least one message round");
  if (frozen_zeta != nullptr && frozen_zeta->size() != static_cast<std::size_t>(opts.layers + 1)) {
    throw Error(ErrorKind::Shape, "frozen zeta trace must have layers + 1 entries");
  }
  UnrollResult res;
  PriorState prior{RealVector::Ones(prob.n()), 0.0};
  prior.zeta = frozen_zeta != nullptr ? (*frozen_zeta)[0]
                                      : kZetaClamp.apply(opts.zeta_init > 0.0 ? opts.zeta_init : prob.zeta_true);
  res.zeta_trace.push_back(prior.zeta);
  PosteriorState post = e_step(prob, prior);

  std::optional<HiddenState> state;
  if (tape != nullptr) tape->layers.resize(static_cast<std::size_t>(opts.layers));
  for (int t = 0; t < opts.layers; ++t) {
    LayerTape* lt = tape != nullptr ? &tape->layers[static_cast<std::size_t>(t)] : nullptr;
    GraphAttributes attrs = graph_attributes(post, opts.gnn.hyper, prior.zeta, opts.gnn.k_edges);
    if (!state) {
      state = init_hidden(attrs, params);
      if (lt != nullptr) lt->initialized_here = true;
    }
    if (lt != nullptr) lt->rounds.resize(static_cast<std::size_t>(opts.gnn.rounds));
    for (int l = 0; l < opts.gnn.rounds; ++l) {
      state = round_impl(*state, attrs, params, lt != nullptr ? &lt->rounds[static_cast<std::size_t>(l)] : nullptr);
    }
    prior.gamma = readout_impl(*state, params, lt != nullptr ? &lt->read : nullptr);
    if (frozen_zeta != nullptr) {
      prior.zeta = (*frozen_zeta)[static_cast<std::size_t>(t + 1)];
    } else if (opts.refresh_noise) {
      prior.zeta = update_noise(post, prob);
    }
    res.zeta_trace.push_back(prior.zeta);
    post = e_step(prob, prior);
    if (lt != nullptr) lt->attrs = std::move(attrs);
  }
  res.mu = post.mu;
  if (prob.x_true) res.loss = (post.mu - *prob.x_true).squaredNorm() / static_cast<double>(prob.n());
  if (tape != nullptr) tape->final_post = std::move(post);
  return res;
}

}  // namespace

GnnParams GnnParams::zeros(const GnnDims& d) {
  GnnParams p;
  p.dims = d;
  p.in_map = dense_zeros(d.n_u, kNodeAttrs);
  p.prop1 = dense_zeros(d.n_h1, 2 * d.n_u + kEdgeAttrs);
  p.prop2 = dense_zeros(d.n_h2, d.n_h1);
  p.prop3 = dense_zeros(d.n_u, d.n_h2);
  p.gru.w_ih = RealMatrix::Zero(3 * d.n_h1, d.n_u + kNodeAttrs);
  p.gru.w_hh = RealMatrix::Zero(3 * d.n_h1, d.n_h1);
  p.gru.b_ih = RealMatrix::Zero(3 * d.n_h1, 1);
  p.gru.b_hh = RealMatrix::Zero(3 * d.n_h1, 1);
  p.out_map = dense_zeros(d.n_u, d.n_h1);
  p.read1 = dense_zeros(d.n_h1, d.n_u);
  p.read2 = dense_zeros(d.n_h2, d.n_h1);
  p.read3 = dense_zeros(1, d.n_h2);
  return p;
}

GnnParams GnnParams::glorot(const GnnDims& d, Seed seed) {
  GnnParams p = zeros(d);
  Rng rng(seed);
  for (Dense* layer : {&p.in_map, &p.prop1, &p.prop2, &p.prop3, &p.out_map, &p.read1, &p.read2, &p.read3}) {
    glorot_fill(layer->w, layer->w.cols(), layer->w.rows(), rng);
  }
  // Per-gate fan-out for the stacked GRU matrices.
  glorot_fill(p.gru.w_ih, p.gru.w_ih.cols(), d.n_h1, rng);
  glorot_fill(p.gru.w_hh, p.gru.w_hh.cols(), d.n_h1, rng);
  p.read3.b(0, 0) = 1.0;
  return p;
}

void GnnParams::for_each(const std::function<void(const std::string&, RealMatrix&)>& f) {
  const auto dense = [&](const std::string& name, Dense& d) {
    f(name + ".w", d.w);
    f(name + ".b", d.b);
  };
  dense("in", in_map);
  dense("prop1", prop1);
  dense("prop2", prop2);
  dense("prop3", prop3);
  f("gru.w_ih", gru.w_ih);
  f("gru.w_hh", gru.w_hh);
  f("gru.b_ih", gru.b_ih);
  f("gru.b_hh", gru.b_hh);
  dense("out", out_map);
  dense("read1", read1);
  dense("read2", read2);
  dense("read3", read3);
}

void GnnParams::for_each(const std::function<void(const std::string&, const RealMatrix&)>& f) const {
  const_cast<GnnParams*>(this)->for_each([&](const std::string& name, RealMatrix& m) { f(name, m); });
}

std::size_t GnnParams::parameter_count() const {
  std::size_t total = 0;
  for_each([&](const std::string&, const RealMatrix& m) { total += static_cast<std::size_t>(m.size()); });
  return total;
}

bool GnnParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const RealMatrix& m) { ok = ok && m.allFinite(); });
  return ok;
}

GnnParams& GnnParams::operator+=(const GnnParams& other) {
  std::vector<const RealMatrix*> rhs;
  other.for_each([&](const std::string&, const RealMatrix& m) { rhs.push_back(&m); });
  std::size_t i = 0;
  for_each([&](const std::string&, RealMatrix& m) { m += *rhs[i++]; });
  return *this;
}

GnnParams& GnnParams::operator*=(double s) {
  for_each([&](const std::string&, RealMatrix& m) { m *= s; });
  return *this;
}

GraphAttributes graph_attributes(const PosteriorState& post, const MrfHyper& hyper, double zeta,
                                 Eigen::Index k_edges) {
  const Eigen::Index n = post.v.rows();
  GraphAttributes a;
  a.beta = hyper.beta;
  a.zeta = zeta;
  a.node.resize(n, kNodeAttrs);
  const ComplexVector vh_mu = post.v.adjoint() * post.mu;  // conj of mu^H v_n
  for (Eigen::Index i = 0; i < n; ++i) {
    a.node(i, 0) = vh_mu(i).real();
    a.node(i, 1) = post.v(i, i).real();
    a.node(i, 2) = hyper.alpha;
    a.node(i, 3) = zeta;
  }
  a.edge_first = post.v.real();

  a.mask.setConstant(n, n, false);
  if (k_edges < 0 || k_edges >= n - 1) {
    a.mask.setConstant(true);
  } else {
    std::vector<Eigen::Index> order;
    for (Eigen::Index i = 0; i < n; ++i) {
      order.clear();
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k != i) order.push_back(k);
      }
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
        return std::abs(post.v(i, l)) > std::abs(post.v(i, r));
      });
      for (Eigen::Index j = 0; j < k_edges; ++j) {
        a.mask(i, order[static_cast<std::size_t>(j)]) = true;
        a.mask(order[static_cast<std::size_t>(j)], i) = true;
      }
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) a.mask(i, i) = false;

  a.offset.assign(static_cast<std::size_t>(n + 1), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      if (a.mask(i, k)) a.neighbor.push_back(k);
    }
    a.offset[static_cast<std::size_t>(i + 1)] = static_cast<Eigen::Index>(a.neighbor.size());
  }
  return a;
}

HiddenState init_hidden(const GraphAttributes& attrs, const GnnParams& params) {
  HiddenState s;
  s.u = affine(attrs.node, params.in_map);
  s.g = RealMatrix::Zero(attrs.nodes(), params.dims.n_h1);
  return s;
}

EdgeMessages propagate(const HiddenState& state, const GraphAttributes& attrs, const GnnParams& params) {
  const Eigen::Index nu = params.dims.n_u;
  EdgeMessages m;
  m.c.resize(attrs.edges(), nu);
  RealVector input(2 * nu + kEdgeAttrs);
  for (Eigen::Index node = 0; node < attrs.nodes(); ++node) {
    for (Eigen::Index e = attrs.offset[node]; e < attrs.offset[node + 1]; ++e) {
      const Eigen::Index k = attrs.neighbor[e];
      const auto f = attrs.edge(node, k);
      input << state.u.row(node).transpose(), state.u.row(k).transpose(), f[0], f[1], f[2];
      const RealVector h1 = (params.prop1.w * input + params.prop1.b.col(0)).cwiseMax(0.0);
      const RealVector h2 = (params.prop2.w * h1 + params.prop2.b.col(0)).cwiseMax(0.0);
      m.c.row(e) = (params.prop3.w * h2 + params.prop3.b.col(0)).transpose();
      m.target.push_back(node);
      m.source.push_back(k);
    }
  }
  return m;
}

HiddenState aggregate(const HiddenState& state, const EdgeMessages& messages, const GraphAttributes& attrs,
                      const GnnParams& params) {
  const Eigen::Index n = attrs.nodes();
  const Eigen::Index nu = params.dims.n_u;
  const Eigen::Index h = params.dims.n_h1;
  RealMatrix x = RealMatrix::Zero(n, nu + kNodeAttrs);
  for (std::size_t e = 0; e < messages.target.size(); ++e) {
    x.row(messages.target[e]).head(nu) += messages.c.row(static_cast<Eigen::Index>(e));
  }
  x.rightCols(kNodeAttrs) = attrs.node;

  HiddenState out;
  out.g.resize(n, h);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RealVector gi = params.gru.w_ih * x.row(i).transpose() + params.gru.b_ih.col(0);
    const RealVector gh = params.gru.w_hh * state.g.row(i).transpose() + params.gru.b_hh.col(0);
    for (Eigen::Index j = 0; j < h; ++j) {
      const double r = sigmoid(gi(j) + gh(j));
      const double z = sigmoid(gi(h + j) + gh(h + j));
      const double c = std::tanh(gi(2 * h + j) + r * gh(2 * h + j));
      out.g(i, j) = (1.0 - z) * c + z * state.g(i, j);
    }
  }
  out.u = affine(out.g, params.out_map);
  return out;
}

RealVector readout(const HiddenState& state, const GnnParams& params) { return readout_impl(state, params, nullptr); }

HiddenState message_round(const HiddenState& state, const GraphAttributes& attrs, const GnnParams& params) {
  return round_impl(state, attrs, params, nullptr);
}

GnnUpdate gnn_prior_update(const PosteriorState& post, const PriorState& prior, const GnnParams& params,
                           const MrfHyper& hyper, const std::optional<HiddenState>& state, int rounds,
                           Eigen::Index k_edges) {
  if (rounds < 1) throw Error(ErrorKind::InvalidParameter, "need at least one message round");
  const GraphAttributes attrs = graph_attributes(post, hyper, prior.zeta, k_edges);
  GnnUpdate out;
  out.state = state ? *state : init_hidden(attrs, params);
  for (int l = 0; l < rounds; ++l) out.state = round_impl(out.state, attrs, params, nullptr);
  out.gamma = readout_impl(out.state, params, nullptr);
  return out;
}

void GnnUpdater::reset(const SparseProblem& /*prob*/) { state_.reset(); }

RealVector GnnUpdater::update(const PosteriorState& post, const PriorState& prior) {
  GnnUpdate up = gnn_prior_update(post, prior, params_, opts_.hyper, state_, opts_.rounds, opts_.k_edges);
  state_ = std::move(up.state);
  return up.gamma;
}

UnrollResult unrolled_forward(const SparseProblem& prob, const GnnParams& params, const UnrollOptions& opts,
                              const std::vector<double>* frozen_zeta) {
  return forward_impl(prob, params, opts, frozen_zeta, nullptr);
}

GradientResult gradients(const GnnParams& params, const std::vector<const SparseProblem*>& batch,
                         const UnrollOptions& opts) {
  if (batch.empty()) throw Error(ErrorKind::InvalidParameter, "empty gradient batch");
  GradientResult out;
  out.grad = GnnParams::zeros(params.dims);
  for (const SparseProblem* prob : batch) {
    if (!prob->x_true) throw Error(ErrorKind::InvalidParameter, "training instance without ground truth");
    UnrollTape tape;
    const UnrollResult fwd = forward_impl(*prob, params, opts, nullptr, &tape);
    if (!std::isfinite(fwd.loss)) throw Error(ErrorKind::TrainingFailure, "non-finite loss");
    out.loss_sum += fwd.loss;

    const Eigen::Index n = prob->n();
    const PosteriorState& fin = tape.final_post;
    // d loss / d gamma of the last E-step: mu = Sigma zeta phi^H y, d mu = -Sigma diag(d gamma) mu.
    const ComplexVector sr = fin.sigma * (fin.mu - *prob->x_true);
    RealVector d_gamma(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      d_gamma(i) = -2.0 / static_cast<double>(n) * (std::conj(sr(i)) * fin.mu(i)).real();
    }

    RealMatrix d_u = RealMatrix::Zero(n, params.dims.n_u);
    RealMatrix d_g = RealMatrix::Zero(n, params.dims.n_h1);
    for (int t = opts.layers - 1; t >= 0; --t) {
      const LayerTape& lt = tape.layers[static_cast<std::size_t>(t)];
      d_u += readout_backward(d_gamma, lt.read, params, out.grad);
      RealMatrix d_node = RealMatrix::Zero(n, kNodeAttrs);
      for (int l = opts.gnn.rounds - 1; l >= 0; --l) {
        round_backward(lt.rounds[static_cast<std::size_t>(l)], lt.attrs, params, out.grad, d_u, d_g, d_node);
      }
      if (lt.initialized_here) {
        dense_backward(d_u, lt.attrs.node, out.grad.in_map);
        d_node += d_u * params.in_map.w;
      }
      // v_nn = zeta gram_nn + gamma_n of the previous layer; the other attributes do not
      // depend on gamma (mu^H v_n = conj(zeta phi^H y)_n).
      d_gamma = d_node.col(1);
    }
  }
  return out;
}

}  // namespace xlmimo
