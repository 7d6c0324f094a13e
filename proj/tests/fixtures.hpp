#pragma once

#include "txpert/data.hpp"
#include "txpert/metrics.hpp"

#include <map>

namespace fixtures {

using namespace txpert;

// Three perturbations (A, B, C) each measured once in two batches of one
// cell line, with two controls per batch. Genes A..E.
inline ExpressionDataset hand_dataset() {
    std::vector<std::string> genes{"A", "B", "C", "D", "E"};
    std::vector<CellMeta> cells{
        {"k1", {}, "L", "b1"},    {"k2", {}, "L", "b1"},    {"k3", {}, "L", "b2"},
        {"k4", {}, "L", "b2"},    {"a1", {"A"}, "L", "b1"}, {"a2", {"A"}, "L", "b2"},
        {"b1", {"B"}, "L", "b1"}, {"b2", {"B"}, "L", "b2"}, {"c1", {"C"}, "L", "b1"},
        {"c2", {"C"}, "L", "b2"},
    };
    Matrix counts(10, 5);
    counts << 10, 20, 30, 40, 50,  //
        12, 18, 33, 37, 50,        //
        9, 25, 28, 41, 47,         //
        11, 19, 35, 38, 52,        //
        2, 22, 31, 45, 55,         //
        3, 24, 27, 43, 49,         //
        14, 4, 36, 39, 48,         //
        10, 6, 29, 44, 51,         //
        13, 21, 8, 40, 60,         //
        8, 27, 5, 36, 58;
    return ExpressionDataset(genes, cells, counts);
}

// Expected baseline deltas written out cell by cell from the normalized matrix.
struct HandBaseline {
    std::map<std::string, RowVector> label_mean;
    RowVector global;
};

inline HandBaseline hand_baseline(const ExpressionDataset& ds) {
    const Matrix& x = ds.normalized();
    const RowVector ctrl_b1 = (x.row(0) + x.row(1)) / 2.0;
    const RowVector ctrl_b2 = (x.row(2) + x.row(3)) / 2.0;
    const RowVector a1 = x.row(4) - ctrl_b1;
    const RowVector a2 = x.row(5) - ctrl_b2;
    const RowVector b1 = x.row(6) - ctrl_b1;
    const RowVector b2 = x.row(7) - ctrl_b2;
    const RowVector c1 = x.row(8) - ctrl_b1;
    const RowVector c2 = x.row(9) - ctrl_b2;
    HandBaseline h;
    h.label_mean["A"] = (a1 + a2) / 2.0;
    h.label_mean["B"] = (b1 + b2) / 2.0;
    h.label_mean["C"] = (c1 + c2) / 2.0;
    h.global = (a1 + a2 + b1 + b2 + c1 + c2) / 6.0;
    return h;
}

}  // namespace fixtures
