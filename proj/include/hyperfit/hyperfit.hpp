#pragma once

// Umbrella header: discovery of sparse interpretable hyperelastic
// strain-energy models from full-field displacements and boundary reactions.

#include "hyperfit/assembly.hpp"
#include "hyperfit/datagen.hpp"
#include "hyperfit/denoise.hpp"
#include "hyperfit/dual.hpp"
#include "hyperfit/errors.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/mesh.hpp"
#include "hyperfit/modelio.hpp"
#include "hyperfit/solver.hpp"
