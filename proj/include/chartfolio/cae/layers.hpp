#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "chartfolio/error.hpp"

namespace chartfolio::cae {

// Activations are per-sample matrices of shape (channels, height * width)
// with row-major pixel order (index = y * width + x).
using Tensor = Eigen::MatrixXd;

struct TensorShape {
    int channels = 0;
    int height = 0;
    int width = 0;
    int pixels() const { return height * width; }
    bool operator==(const TensorShape&) const = default;
    std::string str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" +
               std::to_string(width);
    }
};

struct ParamBlock {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Layer {
  public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<ParamBlock*> params() { return {}; }
    virtual TensorShape output_shape() const = 0;
    virtual std::string describe() const = 0;
};

namespace detail {

// Lowers a padded convolution input into a (in_c * k * k, out_pixels)
// matrix so the convolution becomes a single GEMM.
inline Eigen::MatrixXd im2col(const Tensor& x, const TensorShape& in, int k, int pad) {
    const int oh = in.height + 2 * pad - k + 1;
    const int ow = in.width + 2 * pad - k + 1;
    Eigen::MatrixXd cols(static_cast<long>(in.channels) * k * k,
                         static_cast<long>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const long col = static_cast<long>(oy) * ow + ox;
            long row = 0;
            for (int c = 0; c < in.channels; ++c) {
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy - pad + ky;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox - pad + kx;
                        cols(row, col) =
                            (iy >= 0 && iy < in.height && ix >= 0 && ix < in.width)
                                ? x(c, static_cast<long>(iy) * in.width + ix)
                                : 0.0;
                    }
                }
            }
        }
    }
    return cols;
}

// Scatter-add inverse of im2col, producing the input gradient.
inline Tensor col2im(const Eigen::MatrixXd& cols, const TensorShape& in, int k, int pad) {
    const int oh = in.height + 2 * pad - k + 1;
    const int ow = in.width + 2 * pad - k + 1;
    Tensor dx = Tensor::Zero(in.channels, in.pixels());
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const long col = static_cast<long>(oy) * ow + ox;
            long row = 0;
            for (int c = 0; c < in.channels; ++c) {
                for (int ky = 0; ky < k; ++ky) {
                    const int iy = oy - pad + ky;
                    for (int kx = 0; kx < k; ++kx, ++row) {
                        const int ix = ox - pad + kx;
                        if (iy >= 0 && iy < in.height && ix >= 0 && ix < in.width)
                            dx(c, static_cast<long>(iy) * in.width + ix) += cols(row, col);
                    }
                }
            }
        }
    }
    return dx;
}

} // namespace detail

// Stride-1 convolution with square kernel and symmetric zero padding.
// pad = k / 2 keeps the spatial size ("same" padding for odd k).
class Conv2D : public Layer {
  public:
    Conv2D(std::string name, TensorShape in, int out_channels, int kernel)
        : in_(in), kernel_(kernel), pad_(kernel / 2) {
        out_ = {out_channels, in.height + 2 * pad_ - kernel + 1,
                in.width + 2 * pad_ - kernel + 1};
        weight_.name = name + ".weight";
        weight_.value.setZero(out_channels, static_cast<long>(in.channels) * kernel * kernel);
        bias_.name = name + ".bias";
        bias_.value.setZero(out_channels, 1);
        weight_.zero_grad();
        bias_.zero_grad();
    }

    Tensor forward(const Tensor& x) override {
        input_ = x;
        Eigen::MatrixXd cols = detail::im2col(x, in_, kernel_, pad_);
        Tensor y = weight_.value * cols;
        y.colwise() += bias_.value.col(0);
        // The lowered input is k*k times larger than the activation, so
        // only small ones are kept for backward; large ones are redone.
        if (cols.size() <= kColsCacheLimit)
            cached_cols_ = std::move(cols);
        else
            cached_cols_.resize(0, 0);
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Eigen::MatrixXd cols = cached_cols_.size() > 0
                                   ? std::move(cached_cols_)
                                   : detail::im2col(input_, in_, kernel_, pad_);
        cached_cols_.resize(0, 0);
        weight_.grad.noalias() += dy * cols.transpose();
        bias_.grad.col(0) += dy.rowwise().sum();
        Eigen::MatrixXd dcols = weight_.value.transpose() * dy;
        return detail::col2im(dcols, in_, kernel_, pad_);
    }

    std::vector<ParamBlock*> params() override { return {&weight_, &bias_}; }
    TensorShape output_shape() const override { return out_; }
    std::string describe() const override {
        return "conv" + std::to_string(kernel_) + "x" + std::to_string(kernel_) + " " +
               in_.str() + " -> " + out_.str();
    }

  private:
    // 4M doubles (32MB): covers every layer of the small presets.
    static constexpr long kColsCacheLimit = 4l << 20;

    TensorShape in_, out_;
    int kernel_, pad_;
    ParamBlock weight_, bias_;
    Tensor input_;
    Eigen::MatrixXd cached_cols_;
};

class ReLU : public Layer {
  public:
    explicit ReLU(TensorShape shape) : shape_(shape) {}

    Tensor forward(const Tensor& x) override {
        mask_ = (x.array() > 0.0).cast<double>();
        return x.cwiseProduct(mask_);
    }

    Tensor backward(const Tensor& dy) override { return dy.cwiseProduct(mask_); }

    TensorShape output_shape() const override { return shape_; }
    std::string describe() const override { return "relu " + shape_.str(); }

  private:
    TensorShape shape_;
    Tensor mask_;
};

// 2x2 stride-2 max pool. Ties go to the first element in scan order
// (top-left, top-right, bottom-left, bottom-right) so results do not
// depend on evaluation order.
class MaxPool2x2 : public Layer {
  public:
    explicit MaxPool2x2(TensorShape in) : in_(in) {
        if (in.height % 2 != 0 || in.width % 2 != 0)
            throw config_error("maxpool: odd spatial size " + in.str());
        out_ = {in.channels, in.height / 2, in.width / 2};
    }

    Tensor forward(const Tensor& x) override {
        Tensor y(out_.channels, out_.pixels());
        argmax_.resize(static_cast<size_t>(out_.channels) * out_.pixels());
        for (int c = 0; c < in_.channels; ++c) {
            for (int oy = 0; oy < out_.height; ++oy) {
                for (int ox = 0; ox < out_.width; ++ox) {
                    const long base = static_cast<long>(2 * oy) * in_.width + 2 * ox;
                    const long candidates[4] = {base, base + 1, base + in_.width,
                                                base + in_.width + 1};
                    long best = candidates[0];
                    double best_v = x(c, best);
                    for (int t = 1; t < 4; ++t) {
                        if (x(c, candidates[t]) > best_v) {
                            best = candidates[t];
                            best_v = x(c, best);
                        }
                    }
                    const long o = static_cast<long>(oy) * out_.width + ox;
                    y(c, o) = best_v;
                    argmax_[static_cast<size_t>(c) * out_.pixels() + o] = best;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx = Tensor::Zero(in_.channels, in_.pixels());
        for (int c = 0; c < out_.channels; ++c)
            for (long o = 0; o < out_.pixels(); ++o)
                dx(c, argmax_[static_cast<size_t>(c) * out_.pixels() + o]) += dy(c, o);
        return dx;
    }

    TensorShape output_shape() const override { return out_; }
    std::string describe() const override { return "maxpool2x2 " + in_.str() + " -> " + out_.str(); }

  private:
    TensorShape in_, out_;
    std::vector<long> argmax_;
};

// Collapses each channel to its spatial mean: (C, H*W) -> (C, 1).
class GlobalAvgPool : public Layer {
  public:
    explicit GlobalAvgPool(TensorShape in) : in_(in) {}

    Tensor forward(const Tensor& x) override {
        return x.rowwise().mean();
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(in_.channels, in_.pixels());
        dx.colwise() = dy.col(0) / static_cast<double>(in_.pixels());
        return dx;
    }

    TensorShape output_shape() const override { return {in_.channels, 1, 1}; }
    std::string describe() const override { return "gap " + in_.str() + " -> " + std::to_string(in_.channels); }

  private:
    TensorShape in_;
};

// Fully connected layer on column vectors: (in, 1) -> (out, 1).
class Dense : public Layer {
  public:
    Dense(std::string name, int in, int out) : in_(in), out_(out) {
        weight_.name = name + ".weight";
        weight_.value.setZero(out, in);
        bias_.name = name + ".bias";
        bias_.value.setZero(out, 1);
        weight_.zero_grad();
        bias_.zero_grad();
    }

    Tensor forward(const Tensor& x) override {
        input_ = x;
        return weight_.value * x + bias_.value;
    }

    Tensor backward(const Tensor& dy) override {
        weight_.grad.noalias() += dy * input_.transpose();
        bias_.grad += dy;
        return weight_.value.transpose() * dy;
    }

    std::vector<ParamBlock*> params() override { return {&weight_, &bias_}; }
    TensorShape output_shape() const override { return {out_, 1, 1}; }
    std::string describe() const override {
        return "dense " + std::to_string(in_) + " -> " + std::to_string(out_);
    }

  private:
    int in_, out_;
    ParamBlock weight_, bias_;
    Tensor input_;
};

// Nearest-neighbor 2x upsample; backward sums the four copies.
class Upsample2x : public Layer {
  public:
    explicit Upsample2x(TensorShape in) : in_(in), out_{in.channels, in.height * 2, in.width * 2} {}

    Tensor forward(const Tensor& x) override {
        Tensor y(out_.channels, out_.pixels());
        for (int c = 0; c < in_.channels; ++c)
            for (int iy = 0; iy < in_.height; ++iy)
                for (int ix = 0; ix < in_.width; ++ix) {
                    const double v = x(c, static_cast<long>(iy) * in_.width + ix);
                    const long o = static_cast<long>(2 * iy) * out_.width + 2 * ix;
                    y(c, o) = v;
                    y(c, o + 1) = v;
                    y(c, o + out_.width) = v;
                    y(c, o + out_.width + 1) = v;
                }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(in_.channels, in_.pixels());
        for (int c = 0; c < in_.channels; ++c)
            for (int iy = 0; iy < in_.height; ++iy)
                for (int ix = 0; ix < in_.width; ++ix) {
                    const long o = static_cast<long>(2 * iy) * out_.width + 2 * ix;
                    dx(c, static_cast<long>(iy) * in_.width + ix) =
                        dy(c, o) + dy(c, o + 1) + dy(c, o + out_.width) +
                        dy(c, o + out_.width + 1);
                }
        return dx;
    }

    TensorShape output_shape() const override { return out_; }
    std::string describe() const override { return "upsample2x " + in_.str() + " -> " + out_.str(); }

  private:
    TensorShape in_, out_;
};

class Sigmoid : public Layer {
  public:
    explicit Sigmoid(TensorShape shape) : shape_(shape) {}

    Tensor forward(const Tensor& x) override {
        output_ = (1.0 / (1.0 + (-x.array()).exp())).matrix();
        return output_;
    }

    Tensor backward(const Tensor& dy) override {
        return (dy.array() * output_.array() * (1.0 - output_.array())).matrix();
    }

    TensorShape output_shape() const override { return shape_; }
    std::string describe() const override { return "sigmoid " + shape_.str(); }

  private:
    TensorShape shape_;
    Tensor output_;
};

// Reinterprets a flat (C*H*W, 1) vector as a (C, H*W) activation. The
// element mapping is fixed by the Eigen column-major layout and inverted
// exactly in backward, so forward/backward stay consistent.
class Reshape : public Layer {
  public:
    Reshape(TensorShape out) : out_(out) {}

    Tensor forward(const Tensor& x) override {
        return Eigen::Map<const Tensor>(x.data(), out_.channels, out_.pixels());
    }

    Tensor backward(const Tensor& dy) override {
        return Eigen::Map<const Tensor>(dy.data(), static_cast<long>(out_.channels) * out_.pixels(), 1);
    }

    TensorShape output_shape() const override { return out_; }
    std::string describe() const override { return "reshape -> " + out_.str(); }

  private:
    TensorShape out_;
};

} // namespace chartfolio::cae
