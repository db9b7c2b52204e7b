// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

// Linked into every test binary: socket(), connect() and getaddrinfo() are
// interposed so any attempt to reach the network is refused and counted.
namespace netguard
{

std::size_t attempts() noexcept;
void reset() noexcept;

} // namespace netguard
