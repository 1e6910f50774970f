#pragma once

#include <vector>

#include "load/core/graph.hpp"

namespace load::core {

inline constexpr Real kLeakySlope = Real(0.01);
inline constexpr Real kNormEpsilon = Real(1e-12);

// Row ranges [offsets[s], offsets[s+1]) of a stacked matrix, one per segment.
struct Segments {
    std::vector<int> offsets{0};

    int count() const { return static_cast<int>(offsets.size()) - 1; }
    int begin(int s) const { return offsets[s]; }
    int end(int s) const { return offsets[s + 1]; }
    int length(int s) const { return offsets[s + 1] - offsets[s]; }
    int total() const { return offsets.back(); }
    void append(int n) { offsets.push_back(offsets.back() + n); }
    // Segment index for every row.
    std::vector<int> row_owner() const;
};

Var matmul(Var a, Var b);
Var transpose(Var a);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Adds a length-m vector to every row of an n x m matrix.
Var add_row(Var x, Var bias);
Var scale(Var a, Real s);
Var add_scalar(Var a, Real s);

Var leaky_relu(Var a, Real slope = kLeakySlope);
Var exp(Var a);
Var log(Var a);
Var clamp(Var a, Real lo, Real hi);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var l2_normalize_rows(Var a);
Var rowwise_dot(Var a, Var b);

Var sum(Var a);
Var mean(Var a);
// sum((a - b)^2) as a scalar.
Var squared_error(Var a, Var b);

Var gather_rows(Var x, std::vector<int> rows);
Var slice_rows(Var x, int begin, int end);
Var gather_elements(Var x, std::vector<int> flat_indices);
Var reshape(Var x, Shape shape);
Var stop_gradient(Var x);

// Scaled dot-product attention weights restricted to matching segments: query row r of
// segment s attends over key rows of segment s. Output is the packed row-softmax of
// scale * q_r . k_j, laid out segment by segment, query-major.
Var attention_weights(Var queries, Var keys, const Segments& query_segs, const Segments& key_segs, Real scale);
// Weighted pooling of value rows with packed weights from attention_weights.
Var attention_pool(Var weights, Var values, const Segments& query_segs, const Segments& key_segs);

}  // namespace load::core
