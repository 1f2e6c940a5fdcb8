#include <gtest/gtest.h>

#include <cmath>

#include "../support/gradcheck.hpp"
#include "../support/op_cases.hpp"
#include "spv/grad/adam.hpp"
#include "spv/grad/checkpoint.hpp"
#include "spv/grad/nn.hpp"

using namespace spv;
using namespace spv::grad;
using spv::testing::gradcheck;
using spv::testing::random_tensor;

namespace {

constexpr int kTrials = 10;
constexpr double kTol = 1e-4;

void check_op(const char* label, const std::function<Var(const std::vector<Var>&)>& f,
              const std::function<std::vector<Tensor>(Rng&)>& make_inputs) {
    Rng rng(derive_seed(7, label));
    for (int t = 0; t < kTrials; ++t) {
        const double err = gradcheck(f, make_inputs(rng), rng);
        EXPECT_LT(err, kTol) << label << " trial " << t;
    }
}

}  // namespace

TEST(Conv2d, AllOnesCenterSumsNeighbourhood) {
    Var x(Tensor({1, 1, 3, 3}, 1.0));
    Var w(Tensor({1, 1, 3, 3}, 1.0));
    Var y = conv2d(x, w, Var(), 1, 1);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
    EXPECT_DOUBLE_EQ(y.value()[4], 9.0);
    EXPECT_DOUBLE_EQ(y.value()[0], 4.0);
}

TEST(Conv2d, IdentityKernelReproducesInput) {
    Rng rng(1);
    Tensor in = random_tensor({2, 1, 5, 4}, rng);
    Var y = conv2d(Var(in), Var(Tensor({1, 1, 1, 1}, 1.0)), Var(), 1, 0);
    EXPECT_EQ(y.value(), in);
}

TEST(Conv2d, ZeroKernelGivesZeros) {
    Rng rng(2);
    Var y = conv2d(Var(random_tensor({1, 3, 6, 6}, rng)), Var(Tensor({4, 3, 3, 3}, 0.0)), Var(), 2, 1);
    EXPECT_EQ(y.shape(), (Shape{1, 4, 3, 3}));
    for (double v : y.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(Conv2d, ShapeMismatchNamesOpAndDims) {
    try {
        conv2d(Var(Tensor({1, 2, 4, 4})), Var(Tensor({1, 3, 3, 3})), Var(), 1, 1);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("conv2d"), std::string::npos);
        EXPECT_NE(msg.find("[1x2x4x4]"), std::string::npos);
        EXPECT_NE(msg.find("[1x3x3x3]"), std::string::npos);
    }
    EXPECT_THROW(conv2d(Var(Tensor({1, 1, 4, 4})), Var(Tensor({1, 1, 3, 3})), Var(), 0, 1), ShapeError);
}

TEST(Ops, ElementwiseShapeMismatchThrows) {
    EXPECT_THROW(add(Var(Tensor({2, 3})), Var(Tensor({3, 2}))), ShapeError);
    EXPECT_THROW(max_pool2x2(Var(Tensor({1, 1, 3, 4}))), ShapeError);
}

TEST(Backward, SquareAtThree) {
    Var x(Tensor::scalar(3.0), true);
    backward(mul(x, x));
    EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(Backward, DeadReluBlocksGradient) {
    Var x(Tensor({1}, -1.0), true);
    backward(sum(relu(x)));
    EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, WithoutGraphThrows) {
    Var c(Tensor::scalar(2.0));
    EXPECT_THROW(backward(c), std::logic_error);
    Var p(Tensor({2}, 1.0), true);
    {
        NoGradScope ng;
        Var l = sum(p);
        EXPECT_THROW(backward(l), std::logic_error);
    }
}

TEST(Backward, UnreachableParametersHoldZeros) {
    ParameterStore store;
    Var a = store.add("a", Tensor({2}, 1.0));
    Var b = store.add("b", Tensor({2}, 1.0));
    store.zero_grad();
    backward(sum(square(a)));
    EXPECT_EQ(b.grad(), Tensor({2}, 0.0));
    EXPECT_EQ(a.grad(), Tensor({2}, 2.0));
}

TEST(Backward, ConvReluMeanMatchesFiniteDifferences) {
    Rng rng(11);
    const double err = gradcheck(
        [](const std::vector<Var>& v) { return mean(relu(conv2d(v[0], v[1], v[2], 1, 1))); },
        {random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), random_tensor({3}, rng)}, rng);
    EXPECT_LT(err, 1e-4);
}

TEST(GradCheck, EveryOp) {
    for (const auto& op : spv::testing::all_op_cases()) check_op(op.name.c_str(), op.f, op.inputs);
}

TEST(BatchNorm, TrainingOutputIsStandardised) {
    Rng rng(3);
    BatchNormState st;
    Var x(random_tensor({4, 3, 5, 5}, rng));
    Var y = batch_norm(x, Var(Tensor({3}, 1.0)), Var(Tensor({3}, 0.0)), st, true);
    for (std::size_t c = 0; c < 3; ++c) {
        double m = 0, s = 0;
        const std::size_t count = 4 * 25;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 25; ++i) m += y.value()[(n * 3 + c) * 25 + i];
        m /= count;
        for (std::size_t n = 0; n < 4; ++n)
            for (std::size_t i = 0; i < 25; ++i) s += std::pow(y.value()[(n * 3 + c) * 25 + i] - m, 2);
        s /= count;
        EXPECT_NEAR(m, 0.0, 1e-6);
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
    // running statistics moved 10% towards the batch statistics
    EXPECT_NE(st.running_mean[0], 0.0);
}

TEST(Determinism, ForwardBackwardBitIdentical) {
    auto run = [] {
        Rng rng(99);
        ParameterStore store;
        Conv2d conv(store, "c", 2, 3, 3, 1, 1, true, rng);
        BatchNorm bn(store, "bn", 3);
        Var x(random_tensor({2, 2, 6, 6}, rng));
        store.zero_grad();
        Var y = mean(sigmoid(bn(conv(x), true)));
        backward(y);
        std::vector<Tensor> out{y.value()};
        for (const auto& p : store.params()) out.push_back(p.gradient());
        return out;
    };
    EXPECT_EQ(run(), run());
}

TEST(Precision, F32ConvolutionCloseToF64) {
    Rng rng(4);
    Tensor x = random_tensor({2, 3, 8, 8}, rng), w = random_tensor({4, 3, 3, 3}, rng);
    Var y64 = conv2d(Var(x), Var(w), Var(), 1, 1);
    PrecisionScope scope(Precision::F32);
    Var y32 = conv2d(Var(x), Var(w), Var(), 1, 1);
    for (std::size_t i = 0; i < y64.value().numel(); ++i) EXPECT_NEAR(y32.value()[i], y64.value()[i], 1e-4);
}

TEST(ParameterStoreTest, DuplicateNamesRejected) {
    ParameterStore store;
    store.add("w", Tensor({1}));
    EXPECT_THROW(store.add("w", Tensor({1})), std::invalid_argument);
}

TEST(ParameterStoreTest, ImportRequiresMatchingShapes) {
    ParameterStore a, b;
    Rng rng(8);
    Linear la(a, "fc", 3, 2, rng);
    Linear lb(b, "fc", 3, 2, rng);
    b.import_tensors(a.export_tensors());
    EXPECT_EQ(lb.weight().value(), la.weight().value());
    ParameterStore c;
    Linear lc(c, "fc", 4, 2, rng);
    EXPECT_THROW(c.import_tensors(a.export_tensors()), ShapeError);
}

TEST(AdamTest, ZeroGradientFreshStateIsFixedPoint) {
    ParameterStore store;
    Var p = store.add("p", Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
    store.zero_grad();
    Adam opt(store.params());
    for (int i = 0; i < 5; ++i) opt.step();
    EXPECT_EQ(p.value(), Tensor({3}, std::vector<double>{1.0, -2.0, 0.5}));
    EXPECT_EQ(opt.steps(), 5u);
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
    ParameterStore store;
    Var p = store.add("p", Tensor::scalar(1.0));
    store.zero_grad();
    p.node()->grad[0] = 1.0;
    Adam opt(store.params(), AdamConfig{0.001});
    opt.step();
    // mhat = 1, vhat = 1 -> step = lr / (1 + eps)
    EXPECT_NEAR(p.value()[0], 0.999, 1e-10);
}

TEST(AdamTest, IndependentParametersOrderInvariant) {
    auto run = [](bool reversed) {
        ParameterStore store;
        Var a = store.add("a", Tensor::scalar(1.0));
        Var b = store.add("b", Tensor::scalar(-3.0));
        store.zero_grad();
        a.node()->grad[0] = 0.5;
        b.node()->grad[0] = -2.0;
        auto params = store.params();
        if (reversed) std::swap(params[0], params[1]);
        Adam opt(params);
        opt.step();
        opt.step();
        return std::pair{a.value()[0], b.value()[0]};
    };
    EXPECT_EQ(run(false), run(true));
}

TEST(AdamTest, NanGradientNamesParameter) {
    ParameterStore store;
    store.add("encoder.conv.weight", Tensor({2}, 1.0));
    store.zero_grad();
    store.params()[0].var.node()->grad[1] = std::nan("");
    Adam opt(store.params());
    try {
        opt.step();
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("encoder.conv.weight"), std::string::npos);
    }
    EXPECT_EQ(store.params()[0].value(), Tensor({2}, 1.0));
}

namespace {

Checkpoint sample_checkpoint() {
    Rng rng(5);
    Checkpoint c{"unet", {}, {}};
    c.metadata["epochs"] = 3;
    c.metadata["note"] = "x";
    c.tensors.push_back({"a.w", random_tensor({2, 3}, rng)});
    c.tensors.push_back({"b", random_tensor({4}, rng)});
    return c;
}

}  // namespace

TEST(CheckpointFormat, RoundTripPreservesEverything) {
    const auto c = sample_checkpoint();
    const auto bytes = serialize_checkpoint(c);
    EXPECT_EQ(bytes.substr(0, 4), "SPVW");
    const auto back = parse_checkpoint(bytes);
    EXPECT_EQ(back.kind, "unet");
    EXPECT_EQ(back.metadata, c.metadata);
    ASSERT_EQ(back.tensors.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(back.tensors[i].name, c.tensors[i].name);
        EXPECT_EQ(back.tensors[i].tensor.shape(), c.tensors[i].tensor.shape());
        EXPECT_EQ(back.tensors[i].tensor, c.tensors[i].tensor);
    }
    EXPECT_EQ(serialize_checkpoint(back), bytes);
}

TEST(CheckpointFormat, CorruptInputsRejected) {
    const auto bytes = serialize_checkpoint(sample_checkpoint());
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(parse_checkpoint(bad_magic), CheckpointError);
    auto bad_version = bytes;
    bad_version[4] = 9;
    EXPECT_THROW(parse_checkpoint(bad_version), CheckpointError);
    for (std::size_t cut : {3u, 10u, 30u}) EXPECT_THROW(parse_checkpoint(bytes.substr(0, cut)), CheckpointError);
    EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
    EXPECT_THROW(parse_checkpoint(bytes + "z"), CheckpointError);
    auto dup = sample_checkpoint();
    dup.tensors[1].name = "a.w";
    EXPECT_THROW(serialize_checkpoint(dup), CheckpointError);
    EXPECT_THROW(load_checkpoint("/nonexistent/dir/ckpt.spvw"), CheckpointError);
}
