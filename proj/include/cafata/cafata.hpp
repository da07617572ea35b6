// Copyright 2026 The cafata Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Everything except the HTTP service, which pulls in cpp-httplib (include service.hpp directly).

#ifndef CAFATA_CAFATA_HPP
#define CAFATA_CAFATA_HPP

#include "cafata/analysis.hpp"
#include "cafata/argumentation.hpp"
#include "cafata/catalog.hpp"
#include "cafata/checkpoint.hpp"
#include "cafata/core.hpp"
#include "cafata/data_ingest.hpp"
#include "cafata/explanation.hpp"
#include "cafata/model.hpp"
#include "cafata/synthetic.hpp"
#include "cafata/training.hpp"

#endif  // CAFATA_CAFATA_HPP
