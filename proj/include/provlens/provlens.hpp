#pragma once

#include "provlens/dataset.hpp"
#include "provlens/error.hpp"
#include "provlens/event.hpp"
#include "provlens/glyphspec.hpp"
#include "provlens/ledger.hpp"
#include "provlens/normalize.hpp"
#include "provlens/profile.hpp"
#include "provlens/scoring.hpp"
#include "provlens/session.hpp"
#include "provlens/transform.hpp"
