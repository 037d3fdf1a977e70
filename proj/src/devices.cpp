#include "emtdq/devices.hpp"

namespace emtdq {

namespace {
void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}
} // namespace

void TransformerParams::validate() const {
    require(x1 > 0 && x2 > 0 && x3 > 0, "transformer: reactances must be positive");
    require(r1 >= 0 && r2 >= 0 && r3 >= 0, "transformer: resistances must be non-negative");
}

void SauerPaiParams::validate() const {
    require(xd >= xd_p && xd_p >= xd_pp && xd_pp > xl && xl >= 0,
            "machine: d-axis reactance ordering xd >= xd' >= xd'' > xl >= 0 violated");
    require(xq >= xq_p && xq_p >= xq_pp && xq_pp > xl,
            "machine: q-axis reactance ordering xq >= xq' >= xq'' > xl violated");
    require(xd_p > xl && xq_p > xl, "machine: transient reactances must exceed leakage");
    require(td0_p > 0 && tq0_p > 0 && td0_pp > 0 && tq0_pp > 0,
            "machine: time constants must be positive");
    require(h > 0, "machine: inertia must be positive");
    require(ra >= 0 && d >= 0, "machine: ra and damping must be non-negative");
}

void AvrTypeIParams::validate() const {
    require(ka > 0 && ta > 0 && ke > 0 && te > 0 && kf >= 0 && tf > 0 && tr > 0,
            "avr: gains/time constants out of range");
}

void GfmParams::validate() const {
    require(xf > 0 && rf >= 0, "gfm: filter choke out of range");
    require(bc > 0, "gfm: filter capacitance must be positive");
    require(tp > 0 && tq > 0, "gfm: measurement lags must be positive");
    require(kp_v >= 0 && ki_v > 0, "gfm: inner PI gains out of range");
    require(mp >= 0 && mq >= 0, "gfm: droop gains must be non-negative");
}

void LineParams::validate() const {
    require(x > 0 && r >= 0 && b >= 0, "line: parameters out of range");
}

void LoadParams::validate() const {
    require(p > 0 || q != 0.0, "load: zero demand");
    require(x() > 0, "load: sized series branch must be inductive");
}

} // namespace emtdq
