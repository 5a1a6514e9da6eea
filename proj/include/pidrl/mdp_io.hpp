#pragma once

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>

#include <json.hpp>

#include "pidrl/errors.hpp"
#include "pidrl/mdp.hpp"

namespace pidrl {

/// JSON document schema: n_states, n_actions, gamma, plus transitions and
/// rewards as n x m x n nested arrays indexed (state, action, next_state).
inline nlohmann::json mdp_to_json(const TabularMdp& mdp) {
    const int n = mdp.n_states();
    const int m = mdp.n_actions();
    nlohmann::json doc;
    doc["n_states"] = n;
    doc["n_actions"] = m;
    doc["gamma"] = mdp.gamma();
    nlohmann::json trans = nlohmann::json::array();
    nlohmann::json rews = nlohmann::json::array();
    for (int x = 0; x < n; ++x) {
        nlohmann::json tx = nlohmann::json::array();
        nlohmann::json rx = nlohmann::json::array();
        for (int a = 0; a < m; ++a) {
            nlohmann::json ta = nlohmann::json::array();
            nlohmann::json ra = nlohmann::json::array();
            for (int y = 0; y < n; ++y) {
                ta.push_back(mdp.transition(x, a, y));
                ra.push_back(mdp.reward(x, a, y));
            }
            tx.push_back(std::move(ta));
            rx.push_back(std::move(ra));
        }
        trans.push_back(std::move(tx));
        rews.push_back(std::move(rx));
    }
    doc["transitions"] = std::move(trans);
    doc["rewards"] = std::move(rews);
    return doc;
}

inline TabularMdp mdp_from_json(const nlohmann::json& doc) {
    const int n = doc.at("n_states").get<int>();
    const int m = doc.at("n_actions").get<int>();
    const double gamma = doc.at("gamma").get<double>();
    if (n <= 0 || m <= 0) throw std::invalid_argument("mdp_from_json: bad dimensions");
    const auto& trans = doc.at("transitions");
    const auto& rews = doc.at("rewards");
    Vec p(static_cast<std::size_t>(n) * m * n);
    Vec r(p.size());
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < m; ++a)
            for (int y = 0; y < n; ++y) {
                const std::size_t idx = (static_cast<std::size_t>(x) * m + a) * n + y;
                p[idx] = trans.at(x).at(a).at(y).get<double>();
                r[idx] = rews.at(x).at(a).at(y).get<double>();
            }
    return TabularMdp(n, m, std::move(p), std::move(r), gamma);
}

inline void save_mdp(const TabularMdp& mdp, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << mdp_to_json(mdp).dump(1) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline TabularMdp load_mdp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    nlohmann::json doc;
    in >> doc;
    return mdp_from_json(doc);
}

}  // namespace pidrl
