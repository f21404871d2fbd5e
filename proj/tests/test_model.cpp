#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "intrasum/checkpoint.hpp"
#include "intrasum/gradcheck.hpp"
#include "intrasum/model.hpp"
#include "intrasum/stepper.hpp"

using namespace intrasum;

namespace {

ModelDims tiny_dims(int32_t vocab_out = 8, int32_t vocab_merged = 10) {
  ModelDims d;
  d.d_emb = 4;
  d.d_enc = 3;
  d.d_dec = 6;
  d.vocab_out = vocab_out;
  d.vocab_merged = vocab_merged;
  return d;
}

// Independent scalar LSTM written against the same fused-gate layout.
void scalar_lstm(const LstmWeights& w, const std::vector<double>& x,
                 const std::vector<double>& h_prev,
                 const std::vector<double>& c_prev, int32_t hidden,
                 std::vector<double>& h, std::vector<double>& c) {
  auto sigm = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  auto gate = [&](size_t row) {
    double acc = w.b.v[row];
    for (size_t j = 0; j < x.size(); ++j) acc += w.w_x.at(row, j) * x[j];
    for (size_t j = 0; j < h_prev.size(); ++j)
      acc += w.w_h.at(row, j) * h_prev[j];
    return acc;
  };
  const size_t H = static_cast<size_t>(hidden);
  h.resize(H);
  c.resize(H);
  for (size_t u = 0; u < H; ++u) {
    const double gi = sigm(gate(u));
    const double gf = sigm(gate(H + u));
    const double go = sigm(gate(2 * H + u));
    const double gg = std::tanh(gate(3 * H + u));
    c[u] = gf * c_prev[u] + gi * gg;
    h[u] = go * std::tanh(c[u]);
  }
}

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("lstm_cell agrees with an independent scalar oracle", "[model]") {
  Rng rng(11);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  const int32_t H = p.dims.d_enc;

  SECTION("random cases match to 1e-12") {
    for (int it = 0; it < 20; ++it) {
      std::vector<double> x(static_cast<size_t>(p.dims.d_emb)),
          h0(static_cast<size_t>(H)), c0(static_cast<size_t>(H));
      for (double& v : x) v = rng.uniform(-1, 1);
      for (double& v : h0) v = rng.uniform(-1, 1);
      for (double& v : c0) v = rng.uniform(-1, 1);

      Tape t;
      LstmVars w{t.leaf_external(&p.enc_fwd.w_x),
                 t.leaf_external(&p.enc_fwd.w_h),
                 t.leaf_external(&p.enc_fwd.b)};
      LstmState s = lstm_cell(t, w, t.leaf(Tensor::vec(x)),
                              t.leaf(Tensor::vec(h0)),
                              t.leaf(Tensor::vec(c0)), H);
      std::vector<double> h_ref, c_ref;
      scalar_lstm(p.enc_fwd, x, h0, c0, H, h_ref, c_ref);
      for (size_t u = 0; u < h_ref.size(); ++u) {
        CHECK(std::abs(t.val(s.h).v[u] - h_ref[u]) < 1e-12);
        CHECK(std::abs(t.val(s.c).v[u] - c_ref[u]) < 1e-12);
      }
    }
  }

  SECTION("all-zero weights and states give zero outputs") {
    LstmWeights zero;
    zero.w_x = Tensor::mat(static_cast<size_t>(4 * H),
                           static_cast<size_t>(p.dims.d_emb), 0.0);
    zero.w_h = Tensor::mat(static_cast<size_t>(4 * H),
                           static_cast<size_t>(H), 0.0);
    zero.b = Tensor::vec(static_cast<size_t>(4 * H), 0.0);
    Tape t;
    LstmVars w{t.leaf_external(&zero.w_x), t.leaf_external(&zero.w_h),
               t.leaf_external(&zero.b)};
    const size_t n = static_cast<size_t>(H);
    LstmState s = lstm_cell(
        t, w, t.leaf(Tensor::vec(static_cast<size_t>(p.dims.d_emb), 0.0)),
        t.leaf(Tensor::vec(n, 0.0)), t.leaf(Tensor::vec(n, 0.0)), H);
    for (double v : t.val(s.h).v) CHECK(v == 0.0);
    for (double v : t.val(s.c).v) CHECK(v == 0.0);
  }

  SECTION("saturated forget gate carries the cell state") {
    // Huge forget bias, tiny other weights: c ~= c_prev + input term.
    LstmWeights w;
    w.w_x = Tensor::mat(static_cast<size_t>(4 * H),
                        static_cast<size_t>(p.dims.d_emb), 0.0);
    w.w_h =
        Tensor::mat(static_cast<size_t>(4 * H), static_cast<size_t>(H), 0.0);
    w.b = Tensor::vec(static_cast<size_t>(4 * H), 0.0);
    for (int32_t u = H; u < 2 * H; ++u) w.b.v[static_cast<size_t>(u)] = 50.0;
    Tape t;
    LstmVars wv{t.leaf_external(&w.w_x), t.leaf_external(&w.w_h),
                t.leaf_external(&w.b)};
    std::vector<double> c_prev(static_cast<size_t>(H), 3.0);
    LstmState s = lstm_cell(
        t, wv, t.leaf(Tensor::vec(static_cast<size_t>(p.dims.d_emb), 0.0)),
        t.leaf(Tensor::vec(static_cast<size_t>(H), 0.0)),
        t.leaf(Tensor::vec(c_prev)), H);
    // input gate is sigmoid(0)=0.5 and candidate tanh(0)=0, so c == c_prev.
    for (double v : t.val(s.c).v) CHECK(v == Catch::Approx(3.0).margin(1e-9));
  }
}

TEST_CASE("encoder properties", "[model]") {
  Rng rng(21);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  std::vector<int32_t> ids = {4, 5, 6, 7, 4, 9};

  SECTION("shapes and determinism") {
    Tape t;
    BoundParams b = bind_params(t, p);
    EncoderStates enc = encode(t, b, ids);
    REQUIRE(enc.n == ids.size());
    for (Var s : enc.states)
      CHECK(t.val(s).size() == static_cast<size_t>(2 * p.dims.d_enc));
    CHECK(t.val(enc.matrix).dim[0] == ids.size());
    // final state is the last per-token state
    const Tensor& fin = t.val(enc.final_state);
    const Tensor& last = t.val(enc.states.back());
    CHECK(std::memcmp(fin.v.data(), last.v.data(),
                      fin.size() * sizeof(double)) == 0);
  }

  SECTION("empty input rejected") {
    Tape t;
    BoundParams b = bind_params(t, p);
    REQUIRE_THROWS_AS(encode(t, b, {}), std::invalid_argument);
  }

  SECTION("n=1 works") {
    Tape t;
    BoundParams b = bind_params(t, p);
    EncoderStates enc = encode(t, b, {4});
    CHECK(enc.n == 1);
  }

  SECTION("truncation reproduces the first k forward components") {
    Tape t1, t2;
    BoundParams b1 = bind_params(t1, p);
    BoundParams b2 = bind_params(t2, p);
    EncoderStates full = encode(t1, b1, ids);
    std::vector<int32_t> trunc(ids.begin(), ids.begin() + 3);
    EncoderStates part = encode(t2, b2, trunc);
    for (size_t i = 0; i < 3; ++i)
      for (int32_t u = 0; u < p.dims.d_enc; ++u)
        CHECK(t1.val(full.states[i]).v[static_cast<size_t>(u)] ==
              t2.val(part.states[i]).v[static_cast<size_t>(u)]);
  }

  SECTION("reversed input mirrors the backward components under tied directions") {
    ModelParams q = p;
    q.enc_bwd = q.enc_fwd;  // same weights both directions
    Tape t1, t2;
    BoundParams b1 = bind_params(t1, q);
    BoundParams b2 = bind_params(t2, q);
    EncoderStates fwd_run = encode(t1, b1, ids);
    std::vector<int32_t> rev(ids.rbegin(), ids.rend());
    EncoderStates rev_run = encode(t2, b2, rev);
    const size_t n = ids.size();
    const size_t H = static_cast<size_t>(p.dims.d_enc);
    for (size_t i = 0; i < n; ++i)
      for (size_t u = 0; u < H; ++u) {
        // backward component of x at i == forward component of rev(x) at n-1-i
        CHECK(t1.val(fwd_run.states[i]).v[H + u] ==
              Catch::Approx(t2.val(rev_run.states[n - 1 - i]).v[u])
                  .margin(1e-15));
      }
  }
}

TEST_CASE("decoder starts from the final encoder state", "[model]") {
  Rng rng(31);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  Tape t;
  BoundParams b = bind_params(t, p);
  DecoderStepper stepper(t, b, {4, 5, 6});
  CHECK(stepper.snapshot().state.h.id == stepper.encoder().final_state.id);
}

TEST_CASE("embedding rows are shared storage, not copies", "[model]") {
  Rng rng(41);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  Tape t;
  BoundParams b = bind_params(t, p);
  const double before = t.val(embed(t, b, 5)).v[0];
  // A decoder-side update mutates the same matrix the encoder reads.
  p.w_emb.at(5, 0) += 0.25;
  const double after = t.val(embed(t, b, 5)).v[0];
  CHECK(after == Catch::Approx(before + 0.25));
  REQUIRE_THROWS_AS(embed(t, b, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(embed(t, b, -1), std::invalid_argument);
}

TEST_CASE("tied output matrix", "[model]") {
  Rng rng(51);
  ModelParams p = ModelParams::init(tiny_dims(), rng);

  SECTION("zero projection gives zero output matrix") {
    ModelParams q = p;
    for (double& x : q.w_proj.v) x = 0.0;
    Tape t;
    BoundParams b = bind_params(t, q);
    for (double v : t.val(shared_output_matrix(t, b)).v) CHECK(v == 0.0);
  }

  SECTION("entries bounded in (-1, 1)") {
    Tape t;
    BoundParams b = bind_params(t, p);
    for (double v : t.val(shared_output_matrix(t, b)).v) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }

  SECTION("gradient flows into the embedding through the tie") {
    auto f = [&]() {
      Tape t;
      BoundParams b = bind_params(t, p);
      Var loss = t.sum(t.tanh(shared_output_matrix(t, b)));
      return t.val(loss).item();
    };
    Tape t;
    BoundParams b = bind_params(t, p);
    Var loss = t.sum(t.tanh(shared_output_matrix(t, b)));
    t.backward(loss);
    Tensor analytic = t.grad(b.w_emb);
    FdReport rep = finite_difference_check(f, p.w_emb, analytic, 1e-5);
    CHECK(rep.max_rel_err < 1e-6);
    // Rows past vocab_out are input-only: untouched by the tie.
    for (size_t r = static_cast<size_t>(p.dims.vocab_out);
         r < static_cast<size_t>(p.dims.vocab_merged); ++r)
      for (size_t cidx = 0; cidx < static_cast<size_t>(p.dims.d_emb); ++cidx)
        CHECK(analytic.at(r, cidx) == 0.0);
  }
}

TEST_CASE("checkpoint round-trip is bit-exact", "[model]") {
  Rng rng(61);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  CheckpointMeta meta{0x1234abcdull, 0xfeed5678ull};
  const std::string path = tmp_path("intrasum_ckpt_test.bin");
  save_checkpoint(p, meta, path);

  CheckpointMeta meta2;
  ModelParams q = load_checkpoint(path, &meta2);
  CHECK(meta2.input_vocab_hash == meta.input_vocab_hash);
  CHECK(meta2.output_vocab_hash == meta.output_vocab_hash);
  CHECK(q.parameter_count() == p.parameter_count());
  auto pn = p.named_tensors();
  auto qn = q.named_tensors();
  for (size_t i = 0; i < pn.size(); ++i) {
    REQUIRE(pn[i].second->same_shape(*qn[i].second));
    CHECK(std::memcmp(pn[i].second->v.data(), qn[i].second->v.data(),
                      pn[i].second->size() * sizeof(double)) == 0);
  }

  SECTION("second save of the loaded params is byte-identical") {
    const std::string path2 = tmp_path("intrasum_ckpt_test2.bin");
    save_checkpoint(q, meta2, path2);
    std::ifstream a(path, std::ios::binary), b2(path2, std::ios::binary);
    std::string sa((std::istreambuf_iterator<char>(a)),
                   std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b2)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
    std::remove(path2.c_str());
  }

  SECTION("corrupted magic rejected") {
    std::ofstream f(path, std::ios::binary);
    f << "NOTACKPT garbage";
    f.close();
    REQUIRE_THROWS(load_checkpoint(path));
  }
  std::remove(path.c_str());
}

TEST_CASE("dims validation", "[model]") {
  ModelDims d = tiny_dims();
  d.d_dec = 5;  // not 2*d_enc
  REQUIRE_THROWS_AS(d.validate(), std::invalid_argument);
  ModelDims ok = ModelDims::desk_profile();
  ok.vocab_out = 8;
  ok.vocab_merged = 12;
  REQUIRE_NOTHROW(ok.validate());
  CHECK(ok.fused_dim() == 64 + 64 + 64);
  ok.intra_decoder = false;
  CHECK(ok.fused_dim() == 64 + 64);
}

TEST_CASE("pretrained embedding loader", "[model]") {
  Rng rng(71);
  ModelParams p = ModelParams::init(tiny_dims(), rng);
  VocabPair vp = build_vocab({{"alpha", "beta", "alpha", "gamma"}},
                             {{"alpha", "beta"}}, 10, 8);
  const std::string path = tmp_path("intrasum_emb_test.txt");
  {
    std::ofstream f(path);
    f << "alpha 1 2 3 4\n";
    f << "missingtoken 9 9 9 9\n";
    f << "gamma 5 6 7 8\n";
  }
  const size_t loaded = load_pretrained_embeddings(p, vp, path);
  CHECK(loaded == 2);
  const int32_t alpha_id = vp.feed_id("alpha");
  CHECK(p.w_emb.at(static_cast<size_t>(alpha_id), 0) == 1.0);
  CHECK(p.w_emb.at(static_cast<size_t>(alpha_id), 3) == 4.0);

  {
    std::ofstream f(path);
    f << "alpha 1 2\n";  // wrong dimension
  }
  REQUIRE_THROWS(load_pretrained_embeddings(p, vp, path));
  std::remove(path.c_str());
}
