#pragma once

// Positional encoding unit: phi(x; A) = [cos A^T x, sin A^T x].
//
// The frequency matrix lives in two 3 x 128 banks. In R3 mode only bank 0
// is read and the MAC cascade is three stages long; in R6 mode the second
// half of the input meets bank 1 and all six stages run.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icarus/fxp.hpp"

namespace icarus {

inline constexpr int kBankCapacity = 128;

enum class PeKind { kNerf, kIsotropicRff, kAnisotropicRff };
enum class PeMode { kR3, kR6 };

const char* to_string(PeKind kind);
const char* to_string(PeMode mode);
PeKind pe_kind_from_string(const std::string& s);
PeMode pe_mode_from_string(const std::string& s);

inline int pe_input_dim(PeMode mode) { return mode == PeMode::kR3 ? 3 : 6; }

/// Host-precision frequency matrix, row-major [input dim][feature].
struct FrequencySpec {
    PeKind kind = PeKind::kNerf;
    PeMode mode = PeMode::kR3;
    int features = 0;
    std::vector<double> a;

    int rows() const { return pe_input_dim(mode); }
    double at(int row, int feature) const { return a[static_cast<size_t>(row) * features + feature]; }
    int encoded_width() const { return 2 * features; }
};

/// Columns 2^l * pi * e_j for l in [0, L), j in {x, y, z}; column 3l + j.
/// Throws std::invalid_argument unless 1 <= L <= 42.
FrequencySpec build_nerf_frequencies(int num_frequencies);

/// Fixed-point frequency matrix as held in the PEU banks.
struct FrequencyMatrix {
    PeKind kind = PeKind::kNerf;
    PeMode mode = PeMode::kR3;
    int features = 0;
    QFormat fmt{};
    std::vector<int16_t> bank0;  // 3 x features, row-major
    std::vector<int16_t> bank1;  // empty in R3 mode
    /// Right shift applied to the 64-bit MAC result so z fits 32 bits for any input.
    int z_shift = 0;

    int encoded_width() const { return 2 * features; }
    /// Throws std::invalid_argument if the bank invariants do not hold.
    void validate() const;
};

/// Stores A with the largest frac_bits that keeps every entry in 16 bits.
/// Throws std::invalid_argument if even frac_bits = 0 overflows.
FrequencyMatrix quantize_frequencies(const FrequencySpec& spec);

/// Builds a fixed-point matrix from explicit parts; computes z_shift.
FrequencyMatrix make_frequency_matrix(PeKind kind, PeMode mode, int features, QFormat fmt,
                                      std::vector<int16_t> bank0, std::vector<int16_t> bank1);

FrequencySpec dequantize(const FrequencyMatrix& m);

struct PeuCounters {
    uint64_t encodes = 0;
    uint64_t bank0_reads = 0;  // frequency words read
    uint64_t bank1_reads = 0;
    uint64_t mac_stages = 0;
    uint64_t cordic_ops = 0;

    PeuCounters& operator+=(const PeuCounters& o);
};

/// 2F values in Q1.14: the cos block followed by the sin block.
struct EncodedFeatures {
    static constexpr QFormat fmt = kQ1_14;
    std::vector<int16_t> values;

    size_t size() const { return values.size(); }
    Fx16 at(size_t i) const { return Fx16{values[i], fmt}; }
};

/// z = A^T p at 32 bits, its frac_bits being A.fmt + p.fmt - A.z_shift.
std::vector<Acc32> frequency_mvm(std::span<const Fx16> p, const FrequencyMatrix& a, PeuCounters* counters = nullptr);

/// Throws std::invalid_argument when p.size() does not match the mode or the
/// components disagree on their format.
EncodedFeatures encode(std::span<const Fx16> p, const FrequencyMatrix& a, PeuCounters* counters = nullptr);

/// Host-precision reference [cos A^T p, sin A^T p].
std::vector<double> encode_reference(std::span<const double> p, const FrequencySpec& a);

}  // namespace icarus
