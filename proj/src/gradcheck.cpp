#include "dcn/gradcheck.hpp"

#include "dcn/trainer.hpp"

namespace dcn {

namespace {

Parameter<double> random_param(const std::string& name, std::vector<std::size_t> shape,
                               Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return Parameter<double>(name, std::move(t));
}

// Weighted sum with fixed random weights so every output element gets a
// distinct, nonzero pull.
Node<double>* probe_loss(Graph<double>& g, Node<double>* x, Rng& rng) {
  Tensor<double> w(x->value.shape);
  for (double& v : w.data) v = rng.uniform(-1.0, 1.0);
  return g.sum(g.mul(x, g.input(std::move(w))));
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradCheckResult> results;
  Rng rng(seed);

  {  // conv2d, stride 1, padding 1
    auto x = random_param("x", {2, 5, 5}, rng);
    auto w = random_param("w", {3, 2, 3, 3}, rng);
    auto b = random_param("b", {3}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("conv2d_s1p1", {&x, &w, &b}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.conv2d(g.param(x), g.param(w), g.param(b), 1, 1);
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // conv2d, stride 2, no padding
    auto x = random_param("x", {2, 6, 6}, rng);
    auto w = random_param("w", {2, 2, 2, 2}, rng);
    auto b = random_param("b", {2}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("conv2d_s2p0", {&x, &w, &b}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.conv2d(g.param(x), g.param(w), g.param(b), 2, 0);
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // relu (inputs kept away from the kink)
    auto x = random_param("x", {3, 4, 4}, rng);
    for (double& v : x.value.data)
      if (std::abs(v) < 0.05) v = v < 0 ? -0.05 : 0.05;
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("relu", {&x}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.relu(g.param(x));
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // sigmoid
    auto x = random_param("x", {2, 3, 3}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("sigmoid", {&x}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.sigmoid(g.param(x));
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // avg_pool 2x2
    auto x = random_param("x", {2, 4, 6}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("avg_pool_2x2", {&x}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.avg_pool(g.param(x), 2, 2);
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // adaptive_avg_pool with uneven regions (5x7 -> 2x3)
    auto x = random_param("x", {2, 5, 7}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("adaptive_avg_pool_5x7_to_2x3", {&x}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.adaptive_avg_pool(g.param(x), 2, 3);
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // batchnorm
    auto x = random_param("x", {3, 4, 4}, rng);
    auto gamma = random_param("gamma", {3}, rng, 0.5, 1.5);
    auto beta = random_param("beta", {3}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("batchnorm", {&x, &gamma, &beta}, [&](bool grad) {
      Graph<double> g;
      Node<double>* out = g.batchnorm(g.param(x), g.param(gamma), g.param(beta));
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, out, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // cosine matrix (Eq. 1) under a probe loss
    auto s = random_param("s", {5, 2, 2}, rng);
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("cosine_matrix", {&s}, [&](bool grad) {
      Graph<double> g;
      Node<double>* a = cosine_matrix_op(g, g.param(s));
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, a, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // Eq. 2 pair-wise loss through the cosine matrix
    auto s = random_param("s", {4, 2, 2}, rng);
    std::vector<int> cls{1, 0, 1, 0};
    Tensor<double> label = build_label_matrix<double>(cls);
    results.push_back(gradcheck("similarity_loss", {&s}, [&](bool grad) {
      Graph<double> g;
      Node<double>* a = cosine_matrix_op(g, g.param(s));
      Node<double>* loss = similarity_loss_op(g, a, label);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {  // Eq. 3 reflection loss
    auto r = random_param("r", {1, 4, 4}, rng);
    Tensor<double> target({1, 4, 4});
    for (double& v : target.data) v = rng.uniform(0.0, 1.0);
    results.push_back(gradcheck("reflection_loss", {&r}, [&](bool grad) {
      Graph<double> g;
      Node<double>* loss = mse_loss_op(g, g.param(r), target);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }

  // Restoration head and the full Eq. 1-4 composite on a tiny model.
  ModelConfig tiny;
  tiny.height = tiny.width = 16;
  tiny.grid_rows = tiny.grid_cols = 2;
  tiny.stage_channels = {6, 8};
  tiny.reflection_hidden = 4;
  tiny.patch_feature_channels = 6;
  DcnModel<double> model(tiny, seed);

  Tensor<double> image({3, 16, 16});
  for (double& v : image.data) v = rng.uniform(0.0, 1.0);
  Tensor<double> r_label({1, tiny.feature_height(), tiny.feature_width()});
  for (double& v : r_label.data) v = rng.uniform(0.0, 1.0);
  std::vector<int> cls{1, 0, 0, 1};
  Tensor<double> a_label = build_label_matrix<double>(cls);

  {
    std::vector<Parameter<double>*> head{&model.param("restore.conv0.w"),
                                         &model.param("restore.conv0.b"),
                                         &model.param("restore.conv1.w"),
                                         &model.param("restore.conv1.b")};
    Rng pr(rng.next_u64());
    results.push_back(gradcheck("restoration_head", head, [&](bool grad) {
      Graph<double> g;
      Node<double>* feat = model.backbone_forward(g, g.input(image));
      Node<double>* s = model.restore_patch_features(g, feat);
      Rng lr(pr);
      Node<double>* loss = probe_loss(g, s, lr);
      if (grad) g.backward(loss);
      return loss->value[0];
    }));
  }
  {
    results.push_back(gradcheck("full_path_overall_loss", model.parameters(), [&](bool grad) {
      Graph<double> g;
      Node<double>* feat = model.backbone_forward(g, g.input(image));
      Node<double>* r_pred = model.reflection_forward(g, feat);
      Node<double>* l_ref = mse_loss_op(g, r_pred, r_label);
      Node<double>* s = model.restore_patch_features(g, feat);
      Node<double>* a = cosine_matrix_op(g, s);
      Node<double>* l_sim = similarity_loss_op(g, a, a_label);
      Node<double>* total = overall_loss_op(g, l_sim, l_ref, tiny.lambda1);
      if (grad) g.backward(total);
      return total->value[0];
    }));
  }
  return results;
}

}  // namespace dcn
