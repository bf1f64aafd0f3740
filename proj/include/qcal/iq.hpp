// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace qcal {

// One demodulated readout sample in the IQ plane.
struct IQPoint {
    double i = 0.0;
    double q = 0.0;
};

} // namespace qcal
