#pragma once

#include <string>

#include "mou/errors.hpp"
#include "mou/matfun.hpp"

namespace mou {

/// Regularly sampled multichannel recording: one row per node, one column
/// per sample.
struct TimeSeries {
    RealMatrix data;         // node_count x sample_count
    double sample_interval;  // seconds

    TimeSeries(RealMatrix d, double interval)
        : data(std::move(d)), sample_interval(interval) {
        if (data.rows() < 1 || data.cols() < 1) {
            throw ShapeError("TimeSeries: need at least one node and one sample");
        }
        if (!(sample_interval > 0.0)) {
            throw DomainError("TimeSeries: sample_interval must be positive, got " +
                              std::to_string(sample_interval));
        }
        if (!data.allFinite()) {
            throw DomainError("TimeSeries: non-finite entries");
        }
    }

    Eigen::Index node_count() const { return data.rows(); }
    Eigen::Index sample_count() const { return data.cols(); }
};

}  // namespace mou
