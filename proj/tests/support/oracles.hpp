#pragma once

// Independent reference implementations used only as test oracles. Each one
// is written as plain scalar loops, separate from the library's code paths.

#include <cstdint>
#include <vector>

#include "cda/autoencoder.hpp"
#include "cda/matrix.hpp"

namespace oracle {

// bilinear resampling to 16x16, align-corners convention
std::vector<double> bilinear_resize_16(const std::vector<double>& src, int h, int w);

// scalar-loop de-noising auto-encoder trainer (full batch, sigmoid, MSE);
// follows the documented init and draw order, all math hand-rolled
cda::DaeLayer scalar_train_dae(const cda::Matrix& data, const cda::DaeConfig& cfg);

// mean squared reconstruction error via per-element loops
double scalar_reconstruction_error(const cda::DaeLayer& layer, const cda::Matrix& data);

// encoder-side forward pass via per-element loops
cda::Matrix scalar_encode(const cda::SdaeModel& model, const cda::Matrix& data);

// triple-loop integer matrix product of binary matrices
cda::BinaryMatrix naive_binary_matmul(const cda::BinaryMatrix& a, const cda::BinaryMatrix& b);

// plain 1-nearest-neighbor under L1, ties to the lowest training index
std::vector<int> naive_1nn(const cda::Matrix& train, const std::vector<int>& labels,
                           const cda::Matrix& queries);

// classical Jacobi eigensolver: rotates the largest off-diagonal element
// each step; returns eigenvalues in descending order
std::vector<double> classical_jacobi_eigenvalues(const cda::Matrix& sym);

// central finite differences of the de-noising loss with respect to every
// parameter of the layer; returns max relative error against the analytic
// gradients
double gradient_max_rel_error(const cda::DaeLayer& layer, const cda::Matrix& clean,
                              const cda::Matrix& input, double step);

} // namespace oracle
