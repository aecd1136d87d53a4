// Copyright 2026 the modlm authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MODLM_VERSION_HPP
#define MODLM_VERSION_HPP

namespace modlm {
inline const char* kVersion = "0.1.0";
}

#endif  // MODLM_VERSION_HPP
