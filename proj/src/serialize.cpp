// SPDX-License-Identifier: Apache-2.0

#include "sparsid/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace sparsid {

using nlohmann::json;

namespace {

json mat_to_json(const Mat& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["data"] = std::vector<double>(m.data(), m.data() + m.size());
    return j;
}

Mat mat_from_json(const json& j) {
    Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    const auto data = j.at("data").get<std::vector<double>>();
    if (data.size() != m.size()) throw DataError("model document: matrix size mismatch");
    std::copy(data.begin(), data.end(), m.data());
    return m;
}

json network_to_json(const Network& net) {
    json j;
    j["activation"] = activation_name(net.act);
    json layers = json::array();
    for (const auto& lay : net.layers) {
        json jl;
        jl["w"] = mat_to_json(lay.w);
        jl["b"] = lay.b;
        jl["mask"] = std::vector<int>(lay.mask.begin(), lay.mask.end());
        layers.push_back(jl);
    }
    j["layers"] = layers;
    return j;
}

Network network_from_json(const json& j) {
    Network net;
    net.act = activation_from_name(j.at("activation").get<std::string>());
    for (const auto& jl : j.at("layers")) {
        LayerParams lay;
        lay.w = mat_from_json(jl.at("w"));
        lay.b = jl.at("b").get<Vec>();
        const auto mask = jl.at("mask").get<std::vector<int>>();
        lay.mask.assign(mask.begin(), mask.end());
        if (lay.b.size() != lay.w.cols() || lay.mask.size() != lay.w.size()) {
            throw DataError("model document: layer shape mismatch");
        }
        net.layers.push_back(std::move(lay));
    }
    if (net.layers.empty()) throw DataError("model document: no layers");
    for (std::size_t l = 1; l < net.layers.size(); ++l) {
        if (net.layers[l].in_width() != net.layers[l - 1].out_width()) {
            throw DataError("model document: layer widths do not chain");
        }
    }
    return net;
}

json hyper_to_json(const HyperState& hs) {
    json j;
    j["granularity"] = granularity_name(hs.gran);
    j["block_rows"] = hs.block_rows;
    j["block_cols"] = hs.block_cols;
    j["floor_upsilon"] = hs.floor_upsilon;
    j["upsilon"] = json::array();
    j["alpha"] = json::array();
    j["omega"] = json::array();
    for (std::size_t l = 0; l < hs.upsilon.size(); ++l) {
        j["upsilon"].push_back(mat_to_json(hs.upsilon[l]));
        j["alpha"].push_back(mat_to_json(hs.alpha[l]));
        j["omega"].push_back(mat_to_json(hs.omega[l]));
    }
    return j;
}

HyperState hyper_from_json(const json& j) {
    HyperState hs;
    hs.gran = granularity_from_name(j.at("granularity").get<std::string>());
    hs.block_rows = j.at("block_rows").get<std::size_t>();
    hs.block_cols = j.at("block_cols").get<std::size_t>();
    hs.floor_upsilon = j.at("floor_upsilon").get<double>();
    for (const auto& m : j.at("upsilon")) hs.upsilon.push_back(mat_from_json(m));
    for (const auto& m : j.at("alpha")) hs.alpha.push_back(mat_from_json(m));
    for (const auto& m : j.at("omega")) hs.omega.push_back(mat_from_json(m));
    return hs;
}

json norm_to_json(const NormStats& st) {
    return json{{"mean_u", st.mean_u}, {"std_u", st.std_u}, {"mean_y", st.mean_y},
                {"std_y", st.std_y}};
}

NormStats norm_from_json(const json& j) {
    NormStats st;
    st.mean_u = j.at("mean_u").get<double>();
    st.std_u = j.at("std_u").get<double>();
    st.mean_y = j.at("mean_y").get<double>();
    st.std_y = j.at("std_y").get<double>();
    return st;
}

json history_to_json(const std::vector<IterRecord>& history) {
    json arr = json::array();
    for (const auto& h : history) {
        json r;
        r["iter"] = h.iter;
        r["train_rmse"] = h.train_rmse;
        if (std::isfinite(h.val_rmse)) r["val_rmse"] = h.val_rmse;
        if (std::isfinite(h.cost_total)) r["cost_total"] = h.cost_total;
        r["sparsity"] = h.sparsity;
        r["active_weights"] = h.active_weights;
        r["pruned"] = h.pruned_this_iter;
        arr.push_back(r);
    }
    return arr;
}

std::vector<IterRecord> history_from_json(const json& arr) {
    std::vector<IterRecord> out;
    for (const auto& r : arr) {
        IterRecord h;
        h.iter = r.at("iter").get<int>();
        h.train_rmse = r.at("train_rmse").get<double>();
        h.val_rmse = r.contains("val_rmse") ? r["val_rmse"].get<double>()
                                            : std::numeric_limits<double>::quiet_NaN();
        h.cost_total = r.contains("cost_total") ? r["cost_total"].get<double>()
                                                : std::numeric_limits<double>::quiet_NaN();
        h.sparsity = r.at("sparsity").get<double>();
        h.active_weights = r.at("active_weights").get<std::size_t>();
        h.pruned_this_iter = r.at("pruned").get<std::size_t>();
        out.push_back(h);
    }
    return out;
}

json cost_log_to_json(const std::vector<LayerCostRecord>& log) {
    json arr = json::array();
    for (const auto& r : log) {
        arr.push_back(json{{"iter", r.iter},
                           {"layer", r.layer},
                           {"data_term", r.cost.data_term},
                           {"reg_term", r.cost.reg_term},
                           {"logdet_upsilon", r.cost.logdet_upsilon},
                           {"logdet_h_plus_inv", r.cost.logdet_h_plus_inv},
                           {"total", r.cost.total},
                           {"constant_term", r.cost.constant_term},
                           {"active_weights", r.active_weights}});
    }
    return arr;
}

std::vector<LayerCostRecord> cost_log_from_json(const json& arr) {
    std::vector<LayerCostRecord> out;
    for (const auto& r : arr) {
        LayerCostRecord rec;
        rec.iter = r.at("iter").get<int>();
        rec.layer = r.at("layer").get<int>();
        rec.cost.data_term = r.at("data_term").get<double>();
        rec.cost.reg_term = r.at("reg_term").get<double>();
        rec.cost.logdet_upsilon = r.at("logdet_upsilon").get<double>();
        rec.cost.logdet_h_plus_inv = r.at("logdet_h_plus_inv").get<double>();
        rec.cost.total = r.at("total").get<double>();
        rec.cost.constant_term = r.at("constant_term").get<double>();
        rec.active_weights = r.at("active_weights").get<std::size_t>();
        out.push_back(rec);
    }
    return out;
}

json model_core_to_json(const char* format, const Network& net, const HyperState& hyper,
                        const std::optional<NormStats>& norm, int n_a, int n_b) {
    json j;
    j["format"] = format;
    j["n_a"] = n_a;
    j["n_b"] = n_b;
    j["network"] = network_to_json(net);
    j["hyper"] = hyper_to_json(hyper);
    if (norm) j["norm"] = norm_to_json(*norm);
    return j;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
    json j = model_core_to_json("sparsid-model/1", model.net, model.hyper, model.norm, model.n_a,
                                model.n_b);
    j["history"] = history_to_json(model.history);
    j["cost_log"] = cost_log_to_json(model.cost_log);
    return j.dump(1);
}

TrainedModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("model document: parse error: ") + e.what());
    }
    try {
        const auto format = j.at("format").get<std::string>();
        if (format != "sparsid-model/1" && format != "sparsid-checkpoint/1") {
            throw DataError("model document: unknown format '" + format + "'");
        }
        TrainedModel m;
        m.net = network_from_json(j.at("network"));
        m.hyper = hyper_from_json(j.at("hyper"));
        if (j.contains("norm")) m.norm = norm_from_json(j["norm"]);
        m.n_a = j.at("n_a").get<int>();
        m.n_b = j.at("n_b").get<int>();
        if (j.contains("history")) m.history = history_from_json(j["history"]);
        if (j.contains("cost_log")) m.cost_log = cost_log_from_json(j["cost_log"]);
        return m;
    } catch (const json::exception& e) {
        throw DataError(std::string("model document: ") + e.what());
    }
}

std::string checkpoint_to_json(const Checkpoint& ck, int n_a, int n_b) {
    json j = model_core_to_json("sparsid-checkpoint/1", ck.net, ck.hyper, ck.norm, n_a, n_b);
    j["next_iter"] = ck.next_iter;
    j["batch_rng_state"] = ck.batch_rng_state;
    j["history"] = history_to_json(ck.history);
    j["cost_log"] = cost_log_to_json(ck.cost_log);
    return j.dump(1);
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint document: parse error: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "sparsid-checkpoint/1") {
            throw DataError("checkpoint document: wrong format field");
        }
        Checkpoint ck;
        ck.next_iter = j.at("next_iter").get<int>();
        ck.net = network_from_json(j.at("network"));
        ck.hyper = hyper_from_json(j.at("hyper"));
        ck.batch_rng_state = j.at("batch_rng_state").get<std::string>();
        if (j.contains("norm")) ck.norm = norm_from_json(j["norm"]);
        ck.history = history_from_json(j.at("history"));
        ck.cost_log = cost_log_from_json(j.at("cost_log"));
        return ck;
    } catch (const json::exception& e) {
        throw DataError(std::string("checkpoint document: ") + e.what());
    }
}

TrainedModel load_model_file(const std::string& path) {
    return model_from_json(load_text_file(path));
}

std::string load_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void save_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
    if (!out) throw DataError("write failed: " + path);
}

void save_text_file_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    save_text_file(tmp, text);
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw DataError("rename failed: " + tmp + " -> " + path);
    }
}

}  // namespace sparsid
