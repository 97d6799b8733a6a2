#pragma once
#include <stdexcept>
#include <string>

namespace gridsense {

// One exception type for the whole library; `kind` lets callers and tests
// distinguish failure classes without a parallel class hierarchy.
class Error : public std::runtime_error {
public:
    enum class Kind {
        Config,            // bad input file / flags / dimensions
        DegenerateBranch,  // branch with r = x = 0
        SingularLoad,      // load at a zero-voltage bus
        ReductionSingular, // eliminated block not invertible
        NotFound,          // unknown branch / bus reference
        Convergence,       // Newton failed
        NotHurwitz,        // Lyapunov solve on an unstable matrix
        Instability,       // simulated trajectory left the basin
        Rate,              // output rate does not divide source rate
        SampleSize,        // covariance window too short
        IllConditioned,    // Q_dd condition number too large
        DegenerateCovariance, // nonpositive denominator in damping formula
        Numerical          // eigen/decomposition failure
    };

    Error(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
    Kind kind;
};

} // namespace gridsense
