#pragma once

#include "cvqkd/errors.hpp"
#include "cvqkd/units.hpp"
#include "cvqkd/random.hpp"
#include "cvqkd/fft.hpp"
#include "cvqkd/wavecore.hpp"
#include "cvqkd/transmitter.hpp"
#include "cvqkd/channel.hpp"
#include "cvqkd/receiver.hpp"
#include "cvqkd/rxdsp.hpp"
#include "cvqkd/estimation.hpp"
#include "cvqkd/config.hpp"
#include "cvqkd/harness.hpp"
#include "cvqkd/selfcheck.hpp"
