#pragma once
#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace logaction {

template <class Scalar_, int Rows_ = Eigen::Dynamic, int Cols_ = Eigen::Dynamic>
using matrix_t = Eigen::Matrix<Scalar_, Rows_, Cols_, Eigen::ColMajor>;

template <class Scalar_, int Rows_ = Eigen::Dynamic>
using vector_t = Eigen::Matrix<Scalar_, Rows_, 1>;

template <class Scalar_>
using map_matrix_t = Eigen::Map<matrix_t<Scalar_>>;

template <class Scalar_>
using const_map_matrix_t = Eigen::Map<const matrix_t<Scalar_>>;

template <class Scalar_>
using map_vector_t = Eigen::Map<vector_t<Scalar_>>;

template <class Scalar_>
using const_map_vector_t = Eigen::Map<const vector_t<Scalar_>>;

using matrix_type = matrix_t<double>;
using vector_type = vector_t<double>;

enum class origin_type
{
    source,
    target
};

inline const char* to_string(origin_type o)
{
    return o == origin_type::source ? "source" : "target";
}

inline origin_type origin_from_string(const std::string& s)
{
    if (s == "source") return origin_type::source;
    if (s == "target") return origin_type::target;
    throw std::invalid_argument("unknown origin: " + s);
}

// Thrown when a tensor argument has the wrong dimensions.
class shape_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Thrown when an operation's precondition is violated by its inputs.
class contract_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Persisted artifact could not be read back (bad tag, version, or body).
class load_error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace logaction
