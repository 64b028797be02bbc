#pragma once

#include "mcflab/core.hpp"
#include "mcflab/geometry.hpp"
#include "mcflab/frames.hpp"
#include "mcflab/grid.hpp"
#include "mcflab/immersion.hpp"
#include "mcflab/flow.hpp"
#include "mcflab/verify.hpp"
#include "mcflab/barrier.hpp"
#include "mcflab/classify.hpp"
#include "mcflab/app/config.hpp"
#include "mcflab/app/scenario.hpp"
#include "mcflab/app/identities.hpp"
#include "mcflab/app/run.hpp"
