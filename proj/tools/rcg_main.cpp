#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <json.hpp>

#include "rcg/chat_client.hpp"
#include "rcg/confused_retrieval.hpp"
#include "rcg/core_model.hpp"
#include "rcg/disturbed_db.hpp"
#include "rcg/embedding.hpp"
#include "rcg/eval_harness.hpp"
#include "rcg/gateway.hpp"
#include "rcg/mock_llm.hpp"

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw rcg::Error("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw rcg::Error("cannot write " + path);
    out << content;
}

// "mock" or "remote:<endpoint>".
std::unique_ptr<rcg::ChatLlmClient> make_client(const std::string& spec,
                                                const std::string& model,
                                                const std::string& mock_table) {
    if (spec == "mock") {
        if (!mock_table.empty())
            return std::make_unique<rcg::MockParaphraser>(
                rcg::MockParaphraser::load_table(mock_table));
        return std::make_unique<rcg::MockParaphraser>();
    }
    constexpr std::string_view kRemote = "remote:";
    if (spec.rfind(kRemote, 0) == 0)
        return std::make_unique<rcg::HttpChatClient>(spec.substr(kRemote.size()), model);
    throw rcg::Error("client spec must be 'mock' or 'remote:<endpoint>'");
}

int cmd_build_db(const std::string& input, const std::string& prompt_file,
                 const std::string& embedder_spec, const std::string& paraphraser_spec,
                 const std::string& rewrite_table, const std::string& model, int in_flight,
                 const std::string& out) {
    auto profiles = rcg::load_profiles_jsonl(input);
    std::vector<rcg::Comment> originals;
    for (const auto& p : profiles)
        originals.insert(originals.end(), p.comments.begin(), p.comments.end());

    rcg::ParaphrasePrompt prompt = prompt_file.empty()
                                       ? rcg::ParaphrasePrompt::default_prompt()
                                       : rcg::ParaphrasePrompt::load_file(prompt_file);
    rcg::EmbedderSpec embedder = rcg::parse_embedder_spec(embedder_spec);
    auto paraphraser = make_client(paraphraser_spec, model, rewrite_table);

    rcg::BuildOptions options;
    options.max_in_flight = in_flight;
    rcg::DisturbedDatabase db =
        rcg::build_database(originals, prompt, *paraphraser, embedder, options);
    rcg::save_database(db, out);

    std::cerr << "built " << out << ": kept=" << db.manifest.kept
              << " dropped=" << db.manifest.dropped << " dim=" << db.embedder_spec.dim
              << " prompt=" << db.prompt_version << '\n';
    return 0;
}

int cmd_defend(const std::string& db_path, const std::string& query_path,
               const std::string& strategy_name, std::uint64_t seed, bool distinct,
               const std::string& embedder_override, const std::string& out) {
    rcg::DisturbedDatabase db = rcg::load_database(db_path);
    rcg::RetrievalIndex index(db);
    rcg::EmbedderSpec embedder = embedder_override.empty()
                                     ? db.embedder_spec
                                     : rcg::parse_embedder_spec(embedder_override);

    rcg::PvaQuery query = rcg::parse_pva_query_text(read_file(query_path));
    rcg::RetrievalStrategy strategy = strategy_name == "random"
                                          ? rcg::RetrievalStrategy::random(seed)
                                          : rcg::RetrievalStrategy::most_irrelevant();

    rcg::DefendedQuery defended =
        rcg::defend_query(query, index, embedder, strategy, distinct);

    write_file(out, rcg::to_json(defended, query.target_attributes).dump(2) + "\n");
    json provenance = {{"strategy", strategy.name()},
                       {"rank_basis", index.size()},
                       {"slots", rcg::to_json(defended.provenance)}};
    write_file(out + ".provenance.json", provenance.dump(2) + "\n");
    std::cerr << "defended " << query.comments.size() << " comment slots -> " << out << '\n';
    return 0;
}

int cmd_serve(const std::string& config_path) {
    rcg::GatewayConfig config = rcg::load_gateway_config(config_path);
    rcg::Gateway gateway(config, &std::cerr);
    std::cerr << "gateway listening on " << config.listen_host << ":" << config.listen_port
              << " -> " << config.upstream_endpoint << '\n';
    gateway.run();
    return 0;
}

int cmd_evaluate(const std::string& profiles_path, const std::string& defense_name,
                 const std::string& db_path, const std::string& model_spec,
                 const std::string& mock_table, std::uint64_t seed,
                 const std::string& out, const std::string& markdown_out,
                 const std::string& csv_out) {
    auto profiles = rcg::load_profiles_jsonl(profiles_path);

    rcg::EvalConfig config;
    config.defense = rcg::defense_from(defense_name);
    config.random_seed = seed;
    config.model_label = model_spec;
    config.database_label = db_path;

    rcg::DisturbedDatabase db;
    if (config.defense != rcg::DefenseMode::None) {
        if (db_path.empty()) throw rcg::Error("--db is required for this defense");
        db = rcg::load_database(db_path);
        config.database = &db;
        config.embedder = db.embedder_spec;
    } else {
        config.embedder = rcg::EmbedderSpec{};
    }

    std::vector<rcg::AttackRecord> records;
    if (model_spec == "mock") {
        rcg::MockAttacker attacker = mock_table.empty()
                                         ? rcg::MockAttacker::from_profiles(profiles)
                                         : rcg::MockAttacker::load_table(mock_table);
        records = rcg::run_attack(profiles, attacker, config);
    } else {
        auto client = make_client(model_spec, "attacker", "");
        records = rcg::run_attack(profiles, *client, config);
    }

    rcg::AsrReport report = rcg::score_asr(records, rcg::fingerprint_of(config));
    write_file(out, rcg::report_json(report).dump(2) + "\n");
    if (!markdown_out.empty())
        write_file(markdown_out, rcg::report_markdown({&report, 1}));
    if (!csv_out.empty()) write_file(csv_out, rcg::records_csv(records));

    std::cerr << "evaluated " << report.timing.queries << " queries, " << report.n_total
              << " attributes: average ASR = " << report.average << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retrieval-confused generation defense gateway and tooling"};
    app.require_subcommand(1);

    // build-db
    std::string bd_input, bd_prompt, bd_embedder = "reference-hash:dim=256";
    std::string bd_paraphraser = "mock", bd_table, bd_model = "paraphraser", bd_out;
    int bd_in_flight = 8;
    auto* build_db = app.add_subcommand("build-db", "Build a disturbed database");
    build_db->add_option("--input", bd_input, "Profile corpus (JSONL)")->required();
    build_db->add_option("--prompt", bd_prompt, "Paraphrase prompt file");
    build_db->add_option("--embedder", bd_embedder, "Embedder spec");
    build_db->add_option("--paraphraser", bd_paraphraser, "mock | remote:<endpoint>");
    build_db->add_option("--rewrite-table", bd_table, "Rewrite table for the mock paraphraser");
    build_db->add_option("--model", bd_model, "Paraphraser model name");
    build_db->add_option("--max-in-flight", bd_in_flight, "Parallel paraphrase cap");
    build_db->add_option("--out", bd_out, "Output database path")->required();

    // defend
    std::string df_db, df_query, df_strategy = "most_irrelevant", df_embedder, df_out;
    std::uint64_t df_seed = 0;
    bool df_distinct = false;
    auto* defend = app.add_subcommand("defend", "Rewrite one query offline");
    defend->add_option("--db", df_db, "Disturbed database")->required();
    defend->add_option("--query", df_query, "Query JSON file")->required();
    defend->add_option("--strategy", df_strategy, "most_irrelevant | random")
        ->check(CLI::IsMember({"most_irrelevant", "random"}));
    defend->add_option("--seed", df_seed, "Seed for the random strategy");
    defend->add_flag("--distinct", df_distinct, "Without-replacement slot selection");
    defend->add_option("--embedder", df_embedder, "Query-side embedder override");
    defend->add_option("--out", df_out, "Defended query output path")->required();

    // serve
    std::string sv_config;
    auto* serve = app.add_subcommand("serve", "Run the defense gateway");
    serve->add_option("--config", sv_config, "Gateway config file")->required();

    // evaluate
    std::string ev_profiles, ev_defense = "none", ev_db, ev_model = "mock";
    std::string ev_table, ev_out, ev_md, ev_csv;
    std::uint64_t ev_seed = 1;
    auto* evaluate = app.add_subcommand("evaluate", "Run the attack harness and score ASR");
    evaluate->add_option("--profiles", ev_profiles, "Profile corpus (JSONL)")->required();
    evaluate->add_option("--defense", ev_defense, "none | rcg | random")
        ->check(CLI::IsMember({"none", "rcg", "random"}));
    evaluate->add_option("--db", ev_db, "Disturbed database");
    evaluate->add_option("--model", ev_model, "mock | remote:<endpoint>");
    evaluate->add_option("--mock-table", ev_table, "Keyword table for the mock attacker");
    evaluate->add_option("--seed", ev_seed, "Seed for the random defense");
    evaluate->add_option("--out", ev_out, "Report JSON output")->required();
    evaluate->add_option("--markdown", ev_md, "Also render a markdown table");
    evaluate->add_option("--records-csv", ev_csv, "Also export raw records as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build_db->parsed())
            return cmd_build_db(bd_input, bd_prompt, bd_embedder, bd_paraphraser, bd_table,
                                bd_model, bd_in_flight, bd_out);
        if (defend->parsed())
            return cmd_defend(df_db, df_query, df_strategy, df_seed, df_distinct, df_embedder,
                              df_out);
        if (serve->parsed()) return cmd_serve(sv_config);
        if (evaluate->parsed())
            return cmd_evaluate(ev_profiles, ev_defense, ev_db, ev_model, ev_table, ev_seed,
                                ev_out, ev_md, ev_csv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
