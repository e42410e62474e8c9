#include "testmend/config.hpp"

#include "testmend/util.hpp"

#include <nlohmann/json.hpp>

namespace testmend {

using json = nlohmann::json;

namespace {

GenParams params_from_json(const json& doc, GenParams defaults) {
    GenParams params = defaults;
    params.temperature = doc.value("temperature", params.temperature);
    params.top_p = doc.value("top_p", params.top_p);
    params.top_k = doc.value("top_k", params.top_k);
    params.max_tokens = doc.value("max_tokens", params.max_tokens);
    if (doc.contains("seed")) {
        params.seed = doc["seed"].get<long>();
    }
    return params;
}

json params_to_json(const GenParams& params) {
    json doc = {
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"top_k", params.top_k},
        {"max_tokens", params.max_tokens},
    };
    if (params.seed) {
        doc["seed"] = *params.seed;
    }
    return doc;
}

} // namespace

Config Config::load(const std::filesystem::path& path) {
    return from_json_text(read_file(path));
}

Config Config::from_json_text(const std::string& text) {
    json doc = json::parse(text);
    Config config;
    if (doc.contains("runner")) {
        const json& r = doc["runner"];
        config.runner.command_template = r.value("command_template", config.runner.command_template);
        config.runner.report_format = r.value("report_format", config.runner.report_format);
        config.runner.timeout_s = r.value("timeout_s", config.runner.timeout_s);
        config.runner.repeat_for_stability =
            r.value("repeat_for_stability", config.runner.repeat_for_stability);
        config.runner.test_file_glob = r.value("test_file_glob", config.runner.test_file_glob);
    }
    if (doc.contains("llm")) {
        const json& l = doc["llm"];
        config.llm.backend = l.value("backend", config.llm.backend);
        config.llm.endpoint = l.value("endpoint", config.llm.endpoint);
        config.llm.api_path = l.value("api_path", config.llm.api_path);
        config.llm.model = l.value("model", config.llm.model);
        if (l.contains("repair")) {
            config.llm.repair = params_from_json(l["repair"], config.llm.repair);
        }
        if (l.contains("mining")) {
            config.llm.mining = params_from_json(l["mining"], config.llm.mining);
        }
        config.llm.replay_store =
            std::string(l.value("replay_store", config.llm.replay_store.string()));
    }
    if (doc.contains("budgets")) {
        config.budget_af = doc["budgets"].value("af", config.budget_af);
        config.budget_cc = doc["budgets"].value("cc", config.budget_cc);
    }
    config.injection_rounds = doc.value("injection_rounds", config.injection_rounds);
    config.stability_runs = doc.value("stability_runs", config.stability_runs);
    if (doc.contains("paths")) {
        const json& p = doc["paths"];
        config.paths.sandbox_root =
            std::string(p.value("sandbox_root", config.paths.sandbox_root.string()));
        config.paths.session_store =
            std::string(p.value("session_store", config.paths.session_store.string()));
    }
    config.seed = doc.value("seed", config.seed);
    config.workers = doc.value("workers", config.workers);
    config.change_catalog = std::string(doc.value("change_catalog", std::string()));
    config.validate();
    return config;
}

std::string Config::to_json_text() const {
    json doc = {
        {"runner",
         {{"command_template", runner.command_template},
          {"report_format", runner.report_format},
          {"timeout_s", runner.timeout_s},
          {"repeat_for_stability", runner.repeat_for_stability},
          {"test_file_glob", runner.test_file_glob}}},
        {"llm",
         {{"backend", llm.backend},
          {"endpoint", llm.endpoint},
          {"api_path", llm.api_path},
          {"model", llm.model},
          {"repair", params_to_json(llm.repair)},
          {"mining", params_to_json(llm.mining)},
          {"replay_store", llm.replay_store.string()}}},
        {"budgets", {{"af", budget_af}, {"cc", budget_cc}}},
        {"injection_rounds", injection_rounds},
        {"stability_runs", stability_runs},
        {"paths",
         {{"sandbox_root", paths.sandbox_root.string()},
          {"session_store", paths.session_store.string()}}},
        {"seed", seed},
        {"workers", workers},
        {"change_catalog", change_catalog.string()},
    };
    return doc.dump(2) + "\n";
}

void Config::validate() const {
    runner.validate();
    if (budget_af <= 0 || budget_cc <= 0) {
        throw std::runtime_error("budgets must be positive");
    }
    if (injection_rounds <= 0 || stability_runs <= 0) {
        throw std::runtime_error("injection_rounds and stability_runs must be positive");
    }
    if (workers <= 0) {
        throw std::runtime_error("workers must be positive");
    }
}

} // namespace testmend
