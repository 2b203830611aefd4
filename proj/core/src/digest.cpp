#include "nldiff/digest.hpp"

#include <array>
#include <charconv>
#include <sstream>

namespace nldiff {

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

namespace {

void append_double(std::string& s, double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    s.append(buf.data(), ptr);
    s.push_back(';');
}

} // namespace

std::string spec_digest(const ControlSpec& spec) {
    std::string s = "control:";
    for (double f : spec.f_values()) {
        append_double(s, f);
    }
    s += spec.interval_grid() ? "interval;" : "values;";
    s += "b=" + spec.b_expr().str() + ";a=" + spec.a_expr().str() + ";flags=";
    const ConditionFlags& d = spec.declared();
    const bool flags[] = {d.convexity,   d.linear_growth,         d.lipschitz,
                          d.local_holder, d.ellipticity,           d.continuity_in_control,
                          d.certain_volatility, d.zero_drift};
    for (bool f : flags) {
        s.push_back(f ? '1' : '0');
    }
    return to_hex(fnv1a64(s));
}

std::string grid_digest(const GridSpec& grid) {
    std::string s = "grid:";
    append_double(s, grid.x_min);
    append_double(s, grid.x_max);
    append_double(s, static_cast<double>(grid.nx));
    append_double(s, grid.T);
    if (grid.dt_policy.kind == DtPolicy::Kind::auto_cfl) {
        s += "auto;";
        append_double(s, grid.dt_policy.safety);
    } else {
        s += "fixed;";
        append_double(s, grid.dt_policy.dt);
    }
    s += (grid.boundary == BoundaryMode::linear_extrapolation) ? "extrap" : "frozen";
    return to_hex(fnv1a64(s));
}

} // namespace nldiff
