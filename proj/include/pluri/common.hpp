#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pluri {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kE = 2.71828182845904523536;

enum class ErrorKind {
    InvalidInput,
    Unsupported,
    Precondition,
    Inconsistent,
    NotPsh,
    Divergence,
    Domain,
    Singular,
    InvalidCertificate,
    Usage,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// Small Hermitian matrix, n <= 3, row-major.
struct Herm {
    int n = 0;
    std::array<cplx, 9> a{};

    Herm() = default;
    explicit Herm(int dim) : n(dim) {}

    cplx& operator()(int i, int j) { return a[3 * i + j]; }
    const cplx& operator()(int i, int j) const { return a[3 * i + j]; }

    static Herm identity(int dim, double s = 1.0);
    static Herm diagonal(const std::vector<double>& d);

    Herm& operator+=(const Herm& o);
    Herm operator+(const Herm& o) const;
    Herm operator-(const Herm& o) const;
    Herm operator*(double s) const;
    double hermitian_defect() const;
};

double det(const Herm& h);
Herm inverse(const Herm& h);
// Ascending eigenvalues.
std::vector<double> eigenvalues(const Herm& h);
double min_eigenvalue(const Herm& h);
// D(h_1, ..., h_n): coefficient normalized so that D(h, ..., h) = det h.
double mixed_discriminant(const std::vector<Herm>& hs);

// Static-chunked parallel loop. Each index is handled by exactly one worker,
// so any body that writes only to its own slot is deterministic.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);
void set_thread_count(int threads);
int thread_count();

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

double sup_norm(const std::vector<double>& v);
double max_value(const std::vector<double>& v);
double min_value(const std::vector<double>& v);

// Deterministic 64-bit FNV-1a hash.
std::uint64_t fnv1a(const std::string& s);

}  // namespace pluri
