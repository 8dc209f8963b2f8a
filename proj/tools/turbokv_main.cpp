// turbokv: desk-scale decoder inference with precomputed per-chunk KV caches.
//
// Commands:
//   ingest  - chunk a corpus, prefill each chunk offline, persist its KV
//   ask     - retrieve chunks and answer via one of four context paths
//   verify  - run the engine's invariant matrix; exit 1 on any failure
//   flops   - analytic cost table for naive vs cached prefill
//   bench   - measured TTFT grid, CSV on stdout
//
// Exit codes: 0 ok, 1 property failure, 2 usage or I/O error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "turbokv/bench.hpp"
#include "turbokv/errors.hpp"
#include "turbokv/pipeline.hpp"
#include "turbokv/rng.hpp"
#include "turbokv/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace turbokv;

namespace {

constexpr const char* kReportSchema = "turbokv-report/1";
constexpr const char* kStoreSchema = "turbokv-store/1";

std::string hex_id(uint64_t id) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << id;
    return out.str();
}

std::string default_store_root() {
    if (const char* env = std::getenv("TURBOKV_STORE")) {
        if (*env) return env;
    }
    return "turbokv_store";
}

StoreDtype dtype_from_string(const std::string& s) {
    if (s == "f64") return StoreDtype::F64;
    if (s == "f32") return StoreDtype::F32;
    throw ConfigError("unknown dtype '" + s + "' (expected f64 or f32)");
}

const char* dtype_to_string(StoreDtype d) {
    return d == StoreDtype::F64 ? "f64" : "f32";
}

std::vector<int64_t> parse_count_list(const std::string& csv, const char* what) {
    std::vector<int64_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoll(item));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": '" + item + "' is not an integer");
        }
        if (out.back() < 1) {
            throw ConfigError(std::string(what) + ": entries must be >= 1");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

json config_to_json(const ModelConfig& c) {
    return json{{"layer_num", c.layer_num},
                {"head_num", c.head_num},
                {"kv_head_num", c.kv_head_num},
                {"head_size", c.head_size},
                {"hidden_size", c.hidden_size},
                {"intermediate_size", c.intermediate_size},
                {"vocab_size", c.vocab_size},
                {"rope_base", c.rope_base},
                {"norm_eps", c.norm_eps}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.layer_num = j.at("layer_num").get<int64_t>();
    c.head_num = j.at("head_num").get<int64_t>();
    c.kv_head_num = j.at("kv_head_num").get<int64_t>();
    c.head_size = j.at("head_size").get<int64_t>();
    c.hidden_size = j.at("hidden_size").get<int64_t>();
    c.intermediate_size = j.at("intermediate_size").get<int64_t>();
    c.vocab_size = j.at("vocab_size").get<int64_t>();
    c.rope_base = j.at("rope_base").get<double>();
    c.norm_eps = j.at("norm_eps").get<double>();
    c.validate();
    return c;
}

// The store remembers what built it so `ask` and `bench` reconstruct the
// same engine without repeating flags.
struct StoreMeta {
    ModelConfig config;
    uint64_t seed = 42;
    StoreDtype dtype = StoreDtype::F64;
    std::string preset = "toy";
};

std::string store_meta_path(const std::string& root) {
    return (fs::path(root) / "store.json").string();
}

void save_store_meta(const std::string& root, const StoreMeta& meta) {
    json j{{"schema", kStoreSchema},
           {"preset", meta.preset},
           {"seed", meta.seed},
           {"dtype", dtype_to_string(meta.dtype)},
           {"config", config_to_json(meta.config)}};
    wire::atomic_write_file(store_meta_path(root), j.dump(2) + "\n");
}

bool load_store_meta(const std::string& root, StoreMeta& meta) {
    const std::string path = store_meta_path(root);
    if (!fs::exists(path)) return false;
    json j = json::parse(wire::read_file(path));
    if (j.value("schema", "") != kStoreSchema) {
        throw FormatError("unrecognized store metadata schema in " + path);
    }
    meta.preset = j.value("preset", "custom");
    meta.seed = j.at("seed").get<uint64_t>();
    meta.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    meta.config = config_from_json(j.at("config"));
    return true;
}

std::vector<Document> load_corpus(const std::string& path) {
    if (!fs::exists(path)) {
        throw IoError("corpus path does not exist: " + path);
    }
    std::vector<Document> docs;
    auto read_doc = [&](const fs::path& file) {
        docs.push_back({file.filename().string(), wire::read_file(file.string())});
    };
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) read_doc(f);
    } else {
        read_doc(path);
    }
    return docs;
}

std::string random_text(SplitMix64& rng, int64_t len) {
    std::string s(static_cast<size_t>(len), 'a');
    for (auto& c : s) {
        const uint64_t r = rng.next_below(27);
        c = r == 26 ? ' ' : static_cast<char>('a' + r);
    }
    return s;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               (tag + "-" + std::to_string(static_cast<long long>(::getpid())));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

// ---------------------------------------------------------------- ingest --

struct IngestOpts {
    std::string corpus;
    std::string store_root = default_store_root();
    std::string preset = "toy";
    uint64_t seed = 42;
    std::string dtype = "f64";
    int64_t chunk_bytes = 200;
    bool json_out = false;
};

int cmd_ingest(const IngestOpts& opts) {
    StoreMeta meta;
    meta.config = ModelConfig::preset(opts.preset);
    meta.seed = opts.seed;
    meta.dtype = dtype_from_string(opts.dtype);
    meta.preset = opts.preset;

    StoreMeta existing;
    if (load_store_meta(opts.store_root, existing)) {
        // Re-ingesting into an existing store must not fork its identity.
        meta = existing;
    }

    const std::vector<Document> docs = load_corpus(opts.corpus);
    Engine engine(meta.config, meta.seed, opts.store_root, meta.dtype);
    const IngestStats stats = engine.ingest(docs, opts.chunk_bytes);
    save_store_meta(opts.store_root, meta);

    if (opts.json_out) {
        json j{{"schema", kReportSchema},
               {"command", "ingest"},
               {"store", opts.store_root},
               {"documents", docs.size()},
               {"chunks", stats.chunks},
               {"new_chunks", stats.new_chunks},
               {"bytes_written", stats.bytes_written},
               {"indexed_chunks", engine.index().size()},
               {"seed", meta.seed},
               {"preset", meta.preset},
               {"dtype", dtype_to_string(meta.dtype)},
               {"config", config_to_json(meta.config)}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "ingested " << docs.size() << " document(s) -> " << stats.chunks
                  << " chunk(s), " << stats.new_chunks << " new, " << stats.bytes_written
                  << " bytes written\n"
                  << "store: " << opts.store_root << " (" << engine.index().size()
                  << " chunks indexed)\n";
    }
    return 0;
}

// ------------------------------------------------------------------- ask --

struct AskOpts {
    std::string store_root = default_store_root();
    std::string question;
    std::string mode = "turbo-reordered";
    int64_t k = 4;
    int64_t max_new = 32;
    std::string preset = "toy";
    uint64_t seed = 42;
    bool json_out = false;
};

int cmd_ask(const AskOpts& opts) {
    StoreMeta meta;
    if (!load_store_meta(opts.store_root, meta)) {
        meta.config = ModelConfig::preset(opts.preset);
        meta.seed = opts.seed;
        meta.preset = opts.preset;
    }
    const PathMode mode = path_mode_from_string(opts.mode);

    Engine engine(meta.config, meta.seed, opts.store_root, meta.dtype);
    if (opts.k > engine.index().size() && !engine.index().empty()) {
        std::cerr << "warning: k=" << opts.k << " exceeds indexed chunk count "
                  << engine.index().size() << "; using all chunks\n";
    }

    AnswerResult result;
    try {
        result = engine.answer(opts.question, opts.k, mode, opts.max_new);
    } catch (const NoContextError&) {
        if (opts.json_out) {
            json j{{"schema", kReportSchema},
                   {"command", "ask"},
                   {"refused", true},
                   {"reason", "no documents ingested"}};
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << "refusing to answer: no documents have been ingested\n";
        }
        return 0;
    }

    if (opts.json_out) {
        std::vector<std::string> retrieved;
        for (uint64_t id : result.retrieved) retrieved.push_back(hex_id(id));
        json j{{"schema", kReportSchema},
               {"command", "ask"},
               {"refused", false},
               {"mode", opts.mode},
               {"question", opts.question},
               {"answer_text", result.text},
               {"answer_tokens", result.tokens},
               {"retrieved", retrieved},
               {"timings_ms",
                {{"retrieval", result.retrieval_ms},
                 {"cache_load", result.cache_load_ms},
                 {"ttft", result.ttft_ms},
                 {"decode", result.decode_ms}}},
               {"flops",
                {{"prefill_measured", result.prefill_flops},
                 {"prefill_modeled", result.modeled_prefill_flops},
                 {"decode_measured", result.decode_flops}}},
               {"context_tokens", result.context_tokens},
               {"query_tokens", result.query_tokens},
               {"seed", meta.seed},
               {"config", config_to_json(meta.config)}};
        // answer_text is raw model bytes and may not be UTF-8; answer_tokens
        // is the exact output, the text is display-only.
        std::cout << j.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    } else {
        std::cout << "mode: " << opts.mode << "\n"
                  << "retrieved:";
        for (uint64_t id : result.retrieved) std::cout << ' ' << hex_id(id);
        std::cout << "\nanswer: " << result.text << "\n"
                  << std::fixed << std::setprecision(3)
                  << "ttft_ms: " << result.ttft_ms
                  << " (cache_load_ms: " << result.cache_load_ms << ")\n"
                  << "retrieval_ms: " << result.retrieval_ms
                  << "  decode_ms: " << result.decode_ms << "\n"
                  << "prefill_flops: " << result.prefill_flops << " (modeled "
                  << result.modeled_prefill_flops << ")\n"
                  << "context_tokens: " << result.context_tokens
                  << "  query_tokens: " << result.query_tokens << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- verify --

struct VerifyOpts {
    uint64_t seed = 42;
    uint64_t case_seed = 0; // nonzero: run exactly this case, once
    int64_t cases = 40;
    int64_t rope_cases = 1000;
    int64_t chunks = 0;    // 0 = randomize per case
    int64_t chunk_len = 0; // payload bytes, 0 = randomize
    int64_t query_len = 0; // tokens, 0 = randomize
    bool inject_fault = false;
};

void print_repro(const VerifyOpts& opts, uint64_t case_seed) {
    std::cout << "REPRO: turbokv verify --case-seed " << case_seed << " --cases 1"
              << (opts.inject_fault ? " --inject-fault" : "") << "\n";
}

int verify_equivalence(const VerifyOpts& opts, Engine& engine) {
    const ModelConfig& config = engine.config();
    bool witness_found = false;
    bool any_multichunk = false;
    double max_composite_diff = 0.0;

    for (int64_t i = 0; i < opts.cases; ++i) {
        const uint64_t case_seed = opts.case_seed != 0
                                       ? opts.case_seed
                                       : SplitMix64::at(opts.seed, static_cast<uint64_t>(i));
        SplitMix64 rng(case_seed);

        const int64_t n_chunks =
            opts.chunks > 0 ? opts.chunks : 1 + static_cast<int64_t>(rng.next_below(8));
        std::vector<uint64_t> ids;
        for (int64_t c = 0; c < n_chunks; ++c) {
            const int64_t len = opts.chunk_len > 0
                                    ? opts.chunk_len
                                    : 1 + static_cast<int64_t>(rng.next_below(64));
            ids.push_back(
                engine.ingest_chunk_payload("verify", tok::encode(random_text(rng, len))));
        }
        const int64_t qlen = opts.query_len > 0
                                 ? opts.query_len
                                 : 1 + static_cast<int64_t>(rng.next_below(32));
        const std::vector<Token> query = tok::encode(random_text(rng, qlen));

        AssembledContext turbo = engine.assemble(ids, PositionMode::Reordered);
        const Matrix turbo_logits = engine.prefill_query(turbo, query);
        AssembledContext naive = engine.naive_prefill_ids(ids, query, MaskMode::Independent);

        const double diff = max_abs_diff(turbo_logits, naive.last_logits);
        if (diff > 1e-10) {
            std::cout << "FAIL equivalence: logits diff " << diff << " (chunks " << n_chunks
                      << ", query " << qlen << ")\n";
            print_repro(opts, case_seed);
            return 1;
        }
        const std::vector<Token> turbo_decode =
            greedy_decode(config, engine.weights(), turbo, 16, tok::kEos);
        const std::vector<Token> naive_decode =
            greedy_decode(config, engine.weights(), naive, 16, tok::kEos);
        if (turbo_decode != naive_decode) {
            std::cout << "FAIL equivalence: greedy decodes diverge (chunks " << n_chunks
                      << ", query " << qlen << ")\n";
            print_repro(opts, case_seed);
            return 1;
        }

        if (n_chunks >= 2) {
            any_multichunk = true;
            AssembledContext composite = engine.assemble(ids, PositionMode::Composite);
            const Matrix composite_logits = engine.prefill_query(composite, query);
            const double cdiff = max_abs_diff(composite_logits, naive.last_logits);
            max_composite_diff = std::max(max_composite_diff, cdiff);
            if (cdiff > 1e-3) witness_found = true;
        }

        if (opts.case_seed != 0) break;
    }
    std::cout << "ok equivalence (" << opts.cases << " cases)\n";

    if (any_multichunk) {
        if (!witness_found) {
            std::cout << "FAIL composite witness: no multi-chunk case exceeded 1e-3"
                      << " (max diff " << max_composite_diff << ")\n";
            print_repro(opts, opts.seed);
            return 1;
        }
        std::cout << "ok composite defect witness (max diff " << max_composite_diff << ")\n";
    }
    return 0;
}

int verify_rope(const VerifyOpts& opts) {
    const int64_t head_sizes[] = {4, 8, 16, 64, 128};
    SplitMix64 rng(opts.seed ^ 0x0051CEULL);
    double worst = 0.0;
    for (int64_t i = 0; i < opts.rope_cases; ++i) {
        const int64_t head_size = head_sizes[rng.next_below(5)];
        const RopeParams params = RopeParams::create(head_size);
        std::vector<double> q(static_cast<size_t>(head_size));
        std::vector<double> k(static_cast<size_t>(head_size));
        for (auto& x : q) x = rng.next_signed();
        for (auto& x : k) x = rng.next_signed();
        const int64_t a = static_cast<int64_t>(rng.next_below(4097));
        const int64_t b = static_cast<int64_t>(rng.next_below(4097));
        const int64_t shift = static_cast<int64_t>(rng.next_below(
            static_cast<uint64_t>(4097 - std::max(a, b))));
        const double base_score = rope_relative_score(q, k, a, b, params);
        const double shifted = rope_relative_score(q, k, a + shift, b + shift, params);
        const double diff = std::fabs(base_score - shifted);
        worst = std::max(worst, diff);
        if (diff > 1e-9) {
            std::cout << "FAIL rope shift invariance: diff " << diff << " at a=" << a
                      << " b=" << b << " shift=" << shift << " head_size=" << head_size << "\n";
            print_repro(opts, opts.seed);
            return 1;
        }
    }
    std::cout << "ok rope shift invariance (" << opts.rope_cases << " cases, worst " << worst
              << ")\n";
    return 0;
}

int verify_roundtrip(const VerifyOpts& opts, Engine& engine) {
    SplitMix64 rng(opts.seed ^ 0x57083ULL);
    const ModelConfig& config = engine.config();
    for (int i = 0; i < 10; ++i) {
        const int64_t len = 1 + static_cast<int64_t>(rng.next_below(64));
        const uint64_t id =
            engine.ingest_chunk_payload("roundtrip", tok::encode(random_text(rng, len)));
        const ChunkKVCache loaded = engine.store().load(id, engine.fingerprint());
        AssembledContext direct = engine.assemble({id}, PositionMode::Reordered);
        for (int64_t l = 0; l < config.layer_num; ++l) {
            if (!(loaded.k[static_cast<size_t>(l)] == direct.k[static_cast<size_t>(l)]) ||
                !(loaded.v[static_cast<size_t>(l)] == direct.v[static_cast<size_t>(l)])) {
                std::cout << "FAIL kv round trip: layer " << l << " not bit-identical\n";
                print_repro(opts, opts.seed);
                return 1;
            }
        }
        // Wrong fingerprint must be rejected.
        try {
            engine.store().load(id, engine.fingerprint() ^ 1);
            std::cout << "FAIL kv round trip: stale fingerprint accepted\n";
            print_repro(opts, opts.seed);
            return 1;
        } catch (const StaleCacheError&) {
        }
    }
    // Truncation must be detected.
    {
        const uint64_t id = engine.ingest_chunk_payload(
            "roundtrip", tok::encode(random_text(rng, 32)));
        const std::string path = engine.store().path_for(id);
        std::string raw = wire::read_file(path);
        raw.resize(raw.size() / 2);
        wire::atomic_write_file(path, raw);
        try {
            engine.store().load(id, engine.fingerprint());
            std::cout << "FAIL kv round trip: truncated file accepted\n";
            print_repro(opts, opts.seed);
            return 1;
        } catch (const FormatError&) {
        }
    }
    // Missing ids must be NotFound.
    try {
        engine.store().load(0xDEADDEADDEADDEADULL, engine.fingerprint());
        std::cout << "FAIL kv round trip: missing chunk loaded\n";
        print_repro(opts, opts.seed);
        return 1;
    } catch (const NotFoundError&) {
    }
    std::cout << "ok kv round trip (10 cases + error paths)\n";
    return 0;
}

int verify_incremental(const VerifyOpts& opts, Engine& engine) {
    SplitMix64 rng(opts.seed ^ 0x19C8ULL);
    const ModelConfig& config = engine.config();
    for (int i = 0; i < 10; ++i) {
        const int64_t total = 2 + static_cast<int64_t>(rng.next_below(95));
        const int64_t split = 1 + static_cast<int64_t>(rng.next_below(
                                      static_cast<uint64_t>(total - 1)));
        std::vector<Token> tokens;
        for (int64_t t = 0; t < total; ++t) {
            tokens.push_back(static_cast<Token>(rng.next_below(
                static_cast<uint64_t>(config.vocab_size))));
        }

        const ForwardResult one_shot =
            forward_tokens(config, engine.weights(), tokens,
                           PositionIds::sequential(total, 0), nullptr, causal_rows(total, 0));

        std::vector<Token> head(tokens.begin(), tokens.begin() + split);
        std::vector<Token> tail(tokens.begin() + split, tokens.end());
        AssembledContext ctx =
            AssembledContext::empty(config.layer_num, engine.fingerprint(), MaskMode::Causal);
        const ForwardResult first =
            forward_tokens(config, engine.weights(), head, PositionIds::sequential(split, 0),
                           nullptr, causal_rows(split, 0));
        ctx.append(first.k, first.v, PositionIds::sequential(split, 0));
        const ForwardResult second =
            forward_tokens(config, engine.weights(), tail,
                           PositionIds::sequential(total - split, split), &ctx,
                           causal_rows(total - split, split));

        Matrix one_shot_tail(total - split, one_shot.logits.cols());
        for (int64_t r = 0; r < total - split; ++r) {
            std::copy(one_shot.logits.row(split + r),
                      one_shot.logits.row(split + r) + one_shot.logits.cols(),
                      one_shot_tail.row(r));
        }
        const double diff = max_abs_diff(one_shot_tail, second.logits);
        if (diff > 1e-10) {
            std::cout << "FAIL incremental forward: diff " << diff << " (total " << total
                      << ", split " << split << ")\n";
            print_repro(opts, opts.seed);
            return 1;
        }
    }
    std::cout << "ok incremental forward (10 splits)\n";
    return 0;
}

int verify_single_chunk(const VerifyOpts& opts, Engine& engine) {
    SplitMix64 rng(opts.seed ^ 0x51C6ULL);
    for (int i = 0; i < 5; ++i) {
        const int64_t len = 1 + static_cast<int64_t>(rng.next_below(64));
        const uint64_t id =
            engine.ingest_chunk_payload("single", tok::encode(random_text(rng, len)));
        const std::vector<Token> query =
            tok::encode(random_text(rng, 1 + static_cast<int64_t>(rng.next_below(16))));

        AssembledContext reordered = engine.assemble({id}, PositionMode::Reordered);
        const Matrix a = engine.prefill_query(reordered, query);
        AssembledContext composite = engine.assemble({id}, PositionMode::Composite);
        const Matrix b = engine.prefill_query(composite, query);
        const Matrix c =
            engine.naive_prefill_ids({id}, query, MaskMode::Causal).last_logits;
        const Matrix d =
            engine.naive_prefill_ids({id}, query, MaskMode::Independent).last_logits;

        const double spread = std::max({max_abs_diff(a, b), max_abs_diff(a, c),
                                        max_abs_diff(a, d)});
        if (spread > 1e-10) {
            std::cout << "FAIL single-chunk degeneracy: spread " << spread << "\n";
            print_repro(opts, opts.seed);
            return 1;
        }
    }
    std::cout << "ok single-chunk degeneracy (5 cases)\n";
    return 0;
}

int cmd_verify(const VerifyOpts& opts) {
    if (opts.cases < 1) throw ConfigError("verify: --cases must be >= 1");
    const ModelConfig config = ModelConfig::toy();
    TempDir tmp("turbokv-verify");
    Engine engine(config, opts.seed, tmp.path.string());

    if (opts.inject_fault) {
        // Corrupt the naive path's mask: the last query row loses sight of
        // the first context token. Equivalence must then fail.
        testing::mask_fault_hook = [](Matrix& mask) {
            mask.at(mask.rows() - 1, 0) = -std::numeric_limits<double>::infinity();
        };
    }

    if (int rc = verify_equivalence(opts, engine); rc != 0) return rc;
    if (int rc = verify_rope(opts); rc != 0) return rc;
    if (int rc = verify_roundtrip(opts, engine); rc != 0) return rc;
    if (int rc = verify_incremental(opts, engine); rc != 0) return rc;
    if (int rc = verify_single_chunk(opts, engine); rc != 0) return rc;
    std::cout << "all properties hold\n";
    return 0;
}

// ----------------------------------------------------------------- flops --

struct FlopsOpts {
    std::string preset = "qwen2-7b";
    int64_t chunk_tokens = 8192;
    int64_t query_tokens = 128;
    std::string batches = "1,2,4,6,8";
    bool json_out = false;
};

int cmd_flops(const FlopsOpts& opts) {
    if (opts.chunk_tokens < 1) throw ConfigError("flops: --chunk-tokens must be >= 1");
    if (opts.query_tokens < 1) throw ConfigError("flops: --query-tokens must be >= 1");
    const ModelConfig config = ModelConfig::preset(opts.preset);
    const std::vector<int64_t> batches = parse_count_list(opts.batches, "flops: --batches");

    json rows = json::array();
    std::ostringstream table;
    table << "config: " << opts.preset << " (layers " << config.layer_num << ", hidden "
          << config.hidden_size << ", heads " << config.head_num << "/" << config.kv_head_num
          << ", head_size " << config.head_size << ", intermediate "
          << config.intermediate_size << ")\n"
          << "chunk_tokens " << opts.chunk_tokens << ", query_tokens " << opts.query_tokens
          << "\n\n"
          << std::left << std::setw(7) << "batch" << std::right << std::setw(14)
          << "naive TFLOPs" << std::setw(14) << "turbo TFLOPs" << std::setw(13)
          << "reduction %" << "\n";
    table << std::fixed << std::setprecision(2);
    for (int64_t b : batches) {
        const FlopsComparison cmp = compare(config, opts.chunk_tokens, opts.query_tokens, b);
        table << std::left << std::setw(7) << b << std::right << std::setw(14)
              << cmp.naive.tflops() << std::setw(14) << cmp.turbo.tflops() << std::setw(13)
              << cmp.reduction_percent << "\n";
        rows.push_back(json{{"batch", b},
                            {"naive_total", cmp.naive.total},
                            {"turbo_total", cmp.turbo.total},
                            {"naive_tflops", cmp.naive.tflops()},
                            {"turbo_tflops", cmp.turbo.tflops()},
                            {"reduction_percent", cmp.reduction_percent}});
    }

    if (opts.json_out) {
        json j{{"schema", kReportSchema},
               {"command", "flops"},
               {"preset", opts.preset},
               {"chunk_tokens", opts.chunk_tokens},
               {"query_tokens", opts.query_tokens},
               {"config", config_to_json(config)},
               {"rows", rows}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << table.str();
    }
    return 0;
}

// ----------------------------------------------------------------- bench --

struct BenchOpts {
    std::string store_root; // empty: private temp store
    std::string grid = "512,1024,2048,4096";
    int64_t query_tokens = 64;
    int64_t reps = 5;
    uint64_t seed = 42;
    std::string preset = "toy";
};

int cmd_bench(const BenchOpts& opts) {
    if (opts.reps < 1) throw ConfigError("bench: --reps must be >= 1");
    BenchConfig config;
    config.doc_grid = parse_count_list(opts.grid, "bench: --doc-grid");
    std::sort(config.doc_grid.begin(), config.doc_grid.end());
    config.query_tokens = opts.query_tokens;
    config.reps = opts.reps;
    config.seed = opts.seed;

    std::unique_ptr<TempDir> tmp;
    std::string root = opts.store_root;
    StoreMeta meta;
    meta.preset = opts.preset;
    meta.seed = opts.seed;
    if (root.empty()) {
        tmp = std::make_unique<TempDir>("turbokv-bench");
        root = tmp->path.string();
        meta.config = ModelConfig::preset(opts.preset);
    } else if (!load_store_meta(root, meta)) {
        meta.config = ModelConfig::preset(opts.preset);
    }

    Engine engine(meta.config, meta.seed, root, meta.dtype);
    const std::vector<BenchRow> rows = run_bench(engine, config);
    if (!tmp) save_store_meta(root, meta);

    std::cout << bench_csv(rows);
    for (const BenchSummary& s : summarize(rows)) {
        std::cerr << std::fixed << std::setprecision(3) << "doc_tokens " << s.doc_tokens
                  << ": turbo median " << s.turbo_median_ms << " ms, naive median "
                  << s.naive_median_ms << " ms, speedup " << std::setprecision(2)
                  << s.speedup << "x\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"precomputed-KV RAG inference engine (desk scale)"};
    app.require_subcommand(1);

    IngestOpts ingest_opts;
    auto* ingest = app.add_subcommand("ingest", "chunk + offline-prefill a corpus into a store");
    ingest->add_option("--corpus", ingest_opts.corpus, "corpus file or directory")->required();
    ingest->add_option("--store", ingest_opts.store_root,
                       "store root (default $TURBOKV_STORE or ./turbokv_store)");
    ingest->add_option("--preset", ingest_opts.preset, "model preset: toy | qwen2-7b");
    ingest->add_option("--seed", ingest_opts.seed, "weight init seed");
    ingest->add_option("--dtype", ingest_opts.dtype, "stored element type: f64 | f32");
    ingest->add_option("--chunk-bytes", ingest_opts.chunk_bytes,
                       "target chunk payload size in bytes");
    ingest->add_flag("--json", ingest_opts.json_out, "JSON report on stdout");

    AskOpts ask_opts;
    auto* ask = app.add_subcommand("ask", "retrieve chunks and answer a question");
    ask->add_option("--store", ask_opts.store_root,
                    "store root (default $TURBOKV_STORE or ./turbokv_store)");
    ask->add_option("--question,-q", ask_opts.question, "question text")->required();
    ask->add_option("--mode", ask_opts.mode,
                    "turbo-reordered | turbo-composite | naive-causal | naive-independent");
    ask->add_option("-k", ask_opts.k, "chunks to retrieve");
    ask->add_option("--max-new", ask_opts.max_new, "decode budget in tokens");
    ask->add_option("--preset", ask_opts.preset, "model preset when the store has no metadata");
    ask->add_option("--seed", ask_opts.seed, "weight seed when the store has no metadata");
    ask->add_flag("--json", ask_opts.json_out, "JSON report on stdout");

    VerifyOpts verify_opts;
    auto* verify = app.add_subcommand("verify", "run the invariant matrix");
    verify->add_option("--seed", verify_opts.seed, "base seed for case generation");
    verify->add_option("--case-seed", verify_opts.case_seed,
                       "run exactly one equivalence case from this seed");
    verify->add_option("--cases", verify_opts.cases, "equivalence cases to run");
    verify->add_option("--rope-cases", verify_opts.rope_cases, "shift-invariance cases");
    verify->add_option("--chunks", verify_opts.chunks, "fix the chunk count per case");
    verify->add_option("--chunk-len", verify_opts.chunk_len, "fix chunk payload bytes");
    verify->add_option("--query-len", verify_opts.query_len, "fix query token count");
    verify->add_flag("--inject-fault", verify_opts.inject_fault,
                     "corrupt one naive mask entry; verify must then fail");

    FlopsOpts flops_opts;
    auto* flops_cmd = app.add_subcommand("flops", "analytic prefill cost table");
    flops_cmd->add_option("--preset", flops_opts.preset, "model preset: toy | qwen2-7b");
    flops_cmd->add_option("--chunk-tokens", flops_opts.chunk_tokens, "cached context tokens");
    flops_cmd->add_option("--query-tokens", flops_opts.query_tokens, "online query tokens");
    flops_cmd->add_option("--batches", flops_opts.batches, "comma-separated batch sizes");
    flops_cmd->add_flag("--json", flops_opts.json_out, "JSON report on stdout");

    BenchOpts bench_opts;
    auto* bench = app.add_subcommand("bench", "TTFT grid, CSV on stdout");
    bench->add_option("--store", bench_opts.store_root,
                      "store root (default: private temp store)");
    bench->add_option("--doc-grid", bench_opts.grid, "comma-separated chunk-token totals");
    bench->add_option("--query-tokens", bench_opts.query_tokens, "query length in tokens");
    bench->add_option("--reps", bench_opts.reps, "timed repetitions per point");
    bench->add_option("--seed", bench_opts.seed, "synthetic corpus seed");
    bench->add_option("--preset", bench_opts.preset, "model preset for fresh stores");

    int rc = 0;
    ingest->callback([&]() { rc = cmd_ingest(ingest_opts); });
    ask->callback([&]() { rc = cmd_ask(ask_opts); });
    verify->callback([&]() { rc = cmd_verify(verify_opts); });
    flops_cmd->callback([&]() { rc = cmd_flops(flops_opts); });
    bench->callback([&]() { rc = cmd_bench(bench_opts); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return rc;
}
