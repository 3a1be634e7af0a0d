// Copyright 2026 The FCDF Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FCDF_FCDF_HPP_
#define FCDF_FCDF_HPP_

#include "fcdf/bytes.hpp"
#include "fcdf/dataset_io.hpp"
#include "fcdf/ecdf.hpp"
#include "fcdf/error.hpp"
#include "fcdf/fhe.hpp"
#include "fcdf/metrics.hpp"
#include "fcdf/partition.hpp"
#include "fcdf/protocol.hpp"
#include "fcdf/random.hpp"
#include "fcdf/ring.hpp"
#include "fcdf/transport.hpp"

#endif  // FCDF_FCDF_HPP_
