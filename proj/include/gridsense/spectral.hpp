#pragma once
#include <complex>
#include <vector>

#include "gridsense/dynamics.hpp"

namespace gridsense {

struct SpectralReport {
    enum class Source { ModelBased, Estimated };
    std::vector<std::complex<double>> eigenvalues;
    CMat right; // columns are right eigenvectors
    CMat left;  // columns are left eigenvectors, scaled so w^T v = 1
    Source source = Source::ModelBased;
    bool degenerate = false; // near-defective eigenbasis; participation unreliable
};

// Dense nonsymmetric decomposition. Left eigenvectors come from the rows of
// V^-1, which makes the biorthogonality w_i^T v_j = delta_ij exact by
// construction.
SpectralReport eigen_decompose(const Mat& A,
                               SpectralReport::Source source =
                                   SpectralReport::Source::ModelBased);

struct Rightmost {
    std::complex<double> lambda;
    CVec v, w; // w^T v = 1
    int index; // position in report.eigenvalues
};

// Max real part; ties by smaller |imag|, then by index.
Rightmost rightmost_eigenvalue(const SpectralReport& rep);

// p_ki = |l_ki r_ki|, columns scaled to unit max.
Mat participation_factors(const SpectralReport& rep);

// Symmetric Hausdorff distance between two spectra (comparison metric for
// model vs estimated eigenvalue clouds).
double spectrum_hausdorff(const std::vector<std::complex<double>>& a,
                          const std::vector<std::complex<double>>& b);

} // namespace gridsense
