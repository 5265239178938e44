#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ubiq/errors.hpp"
#include "ubiq/model.hpp"

namespace ubiq {

// Economy files are line-oriented key-value text:
//
//   # comment
//   horizon 1.0
//   dividend initial=1.0 drift=0.1 vol=0.5
//   agent alpha=0.2 rho=1.0 beta=-0.2 gamma=-0.3 \
//         wage_initial=1.0 wage_drift=0.1 wage_vol=0.1 stock0=0.5 annuity0=0.5
//   policy keep=0.7 ubi=0.2 delta=0.0        (optional)
//
// one `agent` line per agent, in order. The full schema is documented in the
// README. Policies may also be given inline as "keep=0.7,ubi=0.2,delta=0".
struct EconomyFile {
    EconomyModel model;
    std::optional<UbiPolicy> policy;
};

namespace detail {

inline double parse_number(const std::string& text, int line_no) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw ConfigError("line " + std::to_string(line_no) + ": expected a number, got '" +
                          text + "'");
    return v;
}

struct KeyValues {
    std::vector<std::pair<std::string, double>> entries;

    double take(const std::string& key, int line_no) {
        for (auto& [k, v] : entries)
            if (k == key) {
                k.clear();
                return v;
            }
        throw ConfigError("line " + std::to_string(line_no) + ": missing field '" + key + "'");
    }

    void expect_consumed(int line_no) const {
        for (const auto& [k, v] : entries)
            if (!k.empty())
                throw ConfigError("line " + std::to_string(line_no) + ": unknown field '" + k +
                                  "'");
    }
};

inline KeyValues parse_key_values(std::istringstream& rest, int line_no) {
    KeyValues kv;
    std::string token;
    while (rest >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key=value, got '" + token + "'");
        kv.entries.emplace_back(token.substr(0, eq),
                                parse_number(token.substr(eq + 1), line_no));
    }
    return kv;
}

inline UbiPolicy policy_from_kv(KeyValues& kv, int line_no) {
    UbiPolicy p;
    p.lambda_keep = kv.take("keep", line_no);
    p.lambda_ubi = kv.take("ubi", line_no);
    p.delta = kv.take("delta", line_no);
    kv.expect_consumed(line_no);
    return p;
}

}  // namespace detail

inline EconomyFile parse_economy_text(const std::string& text) {
    EconomyFile out;
    bool saw_horizon = false, saw_dividend = false;
    std::istringstream stream(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(stream, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream line(raw);
        std::string head;
        if (!(line >> head)) continue;

        if (head == "horizon") {
            std::string value;
            if (!(line >> value))
                throw ConfigError("line " + std::to_string(line_no) + ": horizon needs a value");
            out.model.horizon = detail::parse_number(value, line_no);
            saw_horizon = true;
        } else if (head == "dividend") {
            auto kv = detail::parse_key_values(line, line_no);
            out.model.dividend.initial = kv.take("initial", line_no);
            out.model.dividend.drift = kv.take("drift", line_no);
            out.model.dividend.vol = kv.take("vol", line_no);
            kv.expect_consumed(line_no);
            saw_dividend = true;
        } else if (head == "agent") {
            auto kv = detail::parse_key_values(line, line_no);
            AgentPreferences prefs;
            prefs.alpha = kv.take("alpha", line_no);
            prefs.rho = kv.take("rho", line_no);
            prefs.beta = kv.take("beta", line_no);
            prefs.gamma = kv.take("gamma", line_no);
            DiffusionSpec wage;
            wage.initial = kv.take("wage_initial", line_no);
            wage.drift = kv.take("wage_drift", line_no);
            wage.vol = kv.take("wage_vol", line_no);
            out.model.initial_stock_shares.push_back(kv.take("stock0", line_no));
            out.model.initial_annuity_shares.push_back(kv.take("annuity0", line_no));
            kv.expect_consumed(line_no);
            out.model.agents.push_back(prefs);
            out.model.wages.push_back(wage);
        } else if (head == "policy") {
            auto kv = detail::parse_key_values(line, line_no);
            out.policy = detail::policy_from_kv(kv, line_no);
        } else {
            throw ConfigError("line " + std::to_string(line_no) + ": unknown directive '" +
                              head + "'");
        }
    }
    if (!saw_horizon) throw ConfigError("economy config: missing 'horizon' line");
    if (!saw_dividend) throw ConfigError("economy config: missing 'dividend' line");
    if (out.model.agents.empty()) throw ConfigError("economy config: no 'agent' lines");
    return out;
}

inline EconomyFile parse_economy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open economy config '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_economy_text(buffer.str());
}

// Reads only the `policy` line of a file, so standalone policy files work as
// well as full economy files.
inline UbiPolicy parse_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open policy file '" + path + "'");
    std::optional<UbiPolicy> found;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream line(raw);
        std::string head;
        if (!(line >> head) || head != "policy") continue;
        auto kv = detail::parse_key_values(line, line_no);
        found = detail::policy_from_kv(kv, line_no);
    }
    if (!found) throw ConfigError("policy file '" + path + "' contains no 'policy' line");
    return *found;
}

// Inline "keep=0.7,ubi=0.2,delta=0" (commas or spaces), or a path to a file
// containing a `policy` line.
inline UbiPolicy parse_policy_spec(const std::string& spec) {
    if (spec.find('=') != std::string::npos) {
        std::string normalized = spec;
        for (char& c : normalized)
            if (c == ',') c = ' ';
        std::istringstream line(normalized);
        auto kv = detail::parse_key_values(line, 0);
        return detail::policy_from_kv(kv, 0);
    }
    return parse_policy_file(spec);
}

}  // namespace ubiq
