#pragma once

// Everything at once.

#include "chdseg/graph_match.hpp"
#include "chdseg/labels.hpp"
#include "chdseg/mesh.hpp"
#include "chdseg/nifti.hpp"
#include "chdseg/phantom.hpp"
#include "chdseg/pipeline.hpp"
#include "chdseg/segment.hpp"
#include "chdseg/skeleton.hpp"
#include "chdseg/vessel_graph.hpp"
#include "chdseg/volume.hpp"
