#include "monilog/cli.hpp"

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "monilog/detect.hpp"
#include "monilog/eval.hpp"
#include "monilog/formats.hpp"
#include "monilog/http.hpp"
#include "monilog/ingest.hpp"
#include "monilog/parser.hpp"
#include "monilog/service.hpp"

namespace monilog {

namespace {

struct Options {
    std::string input = "-";
    std::string output = "-";
    std::string format = "structured";
    std::string source = "default";
    std::uint64_t seed = 0;

    // parser
    std::size_t depth = ParserParams{}.tree_depth;
    double sim_threshold = ParserParams{}.sim_threshold;
    std::size_t max_children = ParserParams{}.max_children;
    std::string templates_path;
    std::string state_path;

    // calibrate
    std::vector<std::string> grid;
    std::size_t sample = kDefaultCalibrationSample;

    // gen
    std::size_t lines = 10000;
    std::string spec_path;
    std::string truth_path;
    double seq_rate = 0.0;
    double quant_rate = 0.0;

    // replay
    double noise_duplicate = 0.0;
    std::size_t noise_shuffle_window = 0;
    double noise_shuffle_prob = 0.0;
    double noise_twist = 0.0;

    // detect
    std::size_t context_len = SequenceParams{}.context_len;
    std::uint64_t min_support = SequenceParams{}.min_support;
    std::size_t top_g = SequenceParams{}.top_g;
    double z_threshold = QuantParams{}.z_threshold;
    std::uint64_t min_samples = QuantParams{}.min_samples;
    std::size_t window = DetectorParams{}.report_window;
    std::size_t reorder_window = NormalizerParams{}.reorder_window;
    std::string learn_path;
    std::string reports_path;

    // serve
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string data_dir;
};

/// Input or output stream that maps "-" to the caller's stdio.
class InputFile {
public:
    InputFile(const std::string& path, std::istream& fallback) {
        if (path == "-") {
            stream_ = &fallback;
            return;
        }
        file_.open(path);
        if (!file_) {
            throw IoError("cannot open '" + path + "' for reading");
        }
        stream_ = &file_;
    }
    std::istream& get() { return *stream_; }

private:
    std::ifstream file_;
    std::istream* stream_ = nullptr;
};

class OutputFile {
public:
    OutputFile(const std::string& path, std::ostream& fallback) : path_(path) {
        if (path == "-") {
            stream_ = &fallback;
            return;
        }
        file_.open(path, std::ios::trunc);
        if (!file_) {
            throw IoError("cannot open '" + path + "' for writing");
        }
        stream_ = &file_;
    }
    std::ostream& get() { return *stream_; }
    void close() {
        stream_->flush();
        if (file_.is_open()) {
            file_.close();
        }
        if (!*stream_ && stream_ != &file_) {
            throw IoError("write failure on '" + path_ + "'");
        }
        if (file_.fail()) {
            throw IoError("write failure on '" + path_ + "'");
        }
    }

private:
    std::string path_;
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

std::string read_all(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

ParserParams parser_params(const Options& o) {
    ParserParams p{o.depth, o.sim_threshold, o.max_children};
    p.validate();
    return p;
}

DetectorParams detector_params(const Options& o) {
    DetectorParams p;
    p.sequence.context_len = o.context_len;
    p.sequence.min_support = o.min_support;
    p.sequence.top_g = o.top_g;
    p.quant.z_threshold = o.z_threshold;
    p.quant.min_samples = o.min_samples;
    p.report_window = o.window;
    p.normalizer.reorder_window = o.reorder_window;
    p.validate();
    return p;
}

std::vector<RawLogRecord> read_records(const Options& o, std::istream& in, std::ostream& err) {
    InputFile file(o.input, in);
    const auto result = read_stream(file.get(), ReadOptions{parse_input_format(o.format), o.source});
    for (const auto& e : result.errors) {
        err << "warning: line " << e.line_no << ": " << e.message << '\n';
    }
    return result.records;
}

std::vector<ParsedLog> read_parsed(const std::string& path, std::istream& in) {
    InputFile file(path, in);
    return read_parsed_stream(file.get());
}

void write_json(const std::string& path, const Json& j, std::ostream& out) {
    OutputFile file(path, out);
    file.get() << j.dump(2) << '\n';
    file.close();
}

std::vector<ParserParams> parse_grid(const Options& o) {
    std::vector<ParserParams> grid;
    for (const auto& item : o.grid) {
        std::stringstream list(item);
        std::string point;
        while (std::getline(list, point, ',')) {
            const auto colon = point.find(':');
            double depth = 0.0;
            double sim = 0.0;
            if (colon == std::string::npos || !parse_number(point.substr(0, colon), depth) ||
                !parse_number(point.substr(colon + 1), sim) || depth < 0 ||
                depth != static_cast<double>(static_cast<std::size_t>(depth))) {
                throw ValidationError("grid point '" + point + "' is not DEPTH:SIM");
            }
            ParserParams p{static_cast<std::size_t>(depth), sim, o.max_children};
            p.validate();
            grid.push_back(p);
        }
    }
    return grid.empty() ? default_calibration_grid() : grid;
}

/// One template record per line; a single JSON array is also accepted.
std::vector<Template> templates_from_export(const std::string& text) {
    Json j = Json::array();
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '[') {
        j = parse_json(text);
    } else {
        std::istringstream lines(text);
        for (std::string line; std::getline(lines, line);) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                j.push_back(parse_json(line));
            }
        }
    }
    std::vector<Template> out;
    try {
        for (const auto& t : j) {
            Template tpl;
            tpl.id = t.at("id").get<TemplateId>();
            tpl.support = t.at("support").get<std::uint64_t>();
            for (const auto piece : split_whitespace(t.at("template").get<std::string>())) {
                tpl.tokens.emplace_back(piece);
            }
            out.push_back(std::move(tpl));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("template export: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------

int cmd_gen(const Options& o, std::ostream& out) {
    auto spec = o.spec_path.empty() ? default_corpus_spec(o.lines)
                                    : parse_corpus_spec(read_all(o.spec_path));
    if (o.seq_rate > 0.0) {
        spec.anomaly_injections.push_back({AnomalyKind::sequential, o.seq_rate});
    }
    if (o.quant_rate > 0.0) {
        spec.anomaly_injections.push_back({AnomalyKind::quantitative, o.quant_rate});
    }
    const auto corpus = generate_synthetic(spec, o.seed);
    OutputFile stream(o.output, out);
    write_stream(stream.get(), corpus.records);
    stream.close();
    if (!o.truth_path.empty()) {
        OutputFile truth(o.truth_path, out);
        write_truth(truth.get(), corpus.truth);
        truth.close();
    }
    return kExitOk;
}

int cmd_replay(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
    NoiseSpec spec{o.noise_duplicate, o.noise_shuffle_window, o.noise_shuffle_prob, o.noise_twist,
                   o.seed};
    spec.validate();
    const auto noisy = inject_noise(read_records(o, in, err), spec);
    OutputFile file(o.output, out);
    write_stream(file.get(), noisy);
    file.close();
    return kExitOk;
}

int cmd_parse(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
    const bool have_state = !o.state_path.empty() && std::filesystem::exists(o.state_path);
    TemplateMiner miner = have_state
                              ? TemplateMiner::restore(
                                    miner_state_from_json(parse_json(read_all(o.state_path))))
                              : TemplateMiner(parser_params(o));
    const Preprocessor preprocessor;
    std::vector<ParsedLog> parsed;
    for (const auto& r : read_records(o, in, err)) {
        parsed.push_back(parse_record(miner, preprocessor, r));
    }
    OutputFile file(o.output, out);
    write_parsed_stream(file.get(), parsed);
    file.close();
    if (!o.templates_path.empty()) {
        OutputFile export_file(o.templates_path, out);
        // The reserved empty-message template is listed only once it has matched.
        for (const auto& t : templates_to_json(miner.export_templates())) {
            if (t.at("id") != kEmptyTemplateId || t.at("support") != 0) {
                export_file.get() << t.dump() << '\n';
            }
        }
        export_file.close();
    }
    if (!o.state_path.empty()) {
        write_json(o.state_path, to_json(miner.state()), out);
    }
    return kExitOk;
}

int cmd_calibrate(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
    auto records = read_records(o, in, err);
    if (records.size() > o.sample) {
        records.resize(o.sample);
    }
    const auto grid = parse_grid(o);
    write_json(o.output, to_json(calibrate(records, grid)), out);
    return kExitOk;
}

int cmd_eval(const Options& o, std::istream& in, std::ostream& out) {
    if (o.truth_path.empty() || o.templates_path.empty()) {
        throw ValidationError("eval needs --truth and --templates");
    }
    const auto parsed = read_parsed(o.input, in);
    const auto templates = templates_from_export(read_all(o.templates_path));
    std::ifstream truth_in(o.truth_path);
    if (!truth_in) {
        throw IoError("cannot open '" + o.truth_path + "' for reading");
    }
    const auto truth = read_truth(truth_in);
    const auto quality = evaluate_parsing(parsed, templates, truth);

    const Preprocessor preprocessor;
    std::vector<ParsedLine> lines;
    for (const auto& p : parsed) {
        ParsedLine line{p.template_id, {}};
        for (auto& t : preprocessor(p.record.message).free_text_tokens) {
            line.tokens.push_back(std::move(t.text));
        }
        lines.push_back(std::move(line));
    }

    Json report;
    report["lines"] = parsed.size();
    report["params"] = nullptr;
    if (!o.state_path.empty()) {
        report["params"] = to_json(miner_state_from_json(parse_json(read_all(o.state_path))).params);
    }
    report["grouping_accuracy"] = quality.grouping_accuracy;
    report["token_accuracy"] = quality.token_accuracy;
    report["unsupervised_score"] =
        lines.empty() ? Json(nullptr) : Json(unsupervised_score(lines, templates));
    report["unsupervised_metric"] = "homogeneity_x_parsimony";
    report["precision"] = nullptr;
    report["recall"] = nullptr;
    report["f1"] = nullptr;
    if (!o.reports_path.empty()) {
        std::set<std::uint64_t> flagged;
        std::ifstream reports_in(o.reports_path);
        if (!reports_in) {
            throw IoError("cannot open '" + o.reports_path + "' for reading");
        }
        std::string line;
        while (std::getline(reports_in, line)) {
            if (!line.empty()) {
                flagged.insert(report_from_json(parse_json(line)).trigger_record.record.seq_no);
            }
        }
        EvalCounts counts;
        for (const auto& t : truth.lines) {
            const bool anomalous = t.anomaly != AnomalyKind::none;
            const bool hit = flagged.count(t.line_no) != 0;
            counts.tp += anomalous && hit ? 1 : 0;
            counts.fp += !anomalous && hit ? 1 : 0;
            counts.fn += anomalous && !hit ? 1 : 0;
        }
        const auto m = detection_metrics(counts);
        report["precision"] = m.precision;
        report["recall"] = m.recall;
        report["f1"] = m.f1;
        report["tp"] = counts.tp;
        report["fp"] = counts.fp;
        report["fn"] = counts.fn;
    }
    write_json(o.output, report, out);
    return kExitOk;
}

int cmd_detect(const Options& o, std::istream& in, std::ostream& out) {
    StreamDetector detector(detector_params(o));
    if (!o.learn_path.empty()) {
        for (const auto& r : read_parsed(o.learn_path, in)) {
            detector.train(r);
        }
    }
    detector.finish_training();
    for (const auto& r : read_parsed(o.input, in)) {
        detector.push(r);
    }
    detector.flush();
    OutputFile file(o.output, out);
    for (const auto& report : detector.take_closed()) {
        file.get() << to_json(report).dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
    }
    file.close();
    return kExitOk;
}

std::atomic<bool> g_stop_requested{false};

extern "C" void request_stop(int) { g_stop_requested = true; }

int cmd_serve(const Options& o, std::ostream& out, std::ostream& err) {
    ServiceConfig config;
    config.data_dir = o.data_dir;
    if (config.data_dir.empty()) {
        if (const char* env = std::getenv("MONILOG_DATA_DIR")) {
            config.data_dir = env;
        }
    }
    config.parser = parser_params(o);
    config.detector = detector_params(o);
    if (!o.learn_path.empty()) {
        config.learn_path = o.learn_path;
    }
    Service service(config);
    HttpServer server(service);
    const int port = server.bind(o.host, o.port);
    if (port < 0) {
        throw IoError("cannot bind " + o.host + ":" + std::to_string(o.port));
    }
    out << "listening on " << o.host << ':' << port << std::endl;
    g_stop_requested = false;
    std::signal(SIGINT, request_stop);
    std::signal(SIGTERM, request_stop);
    std::thread worker([&] { server.serve(); });
    while (!g_stop_requested) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    worker.join();
    err << "stopped\n";
    return kExitOk;
}

void add_io(CLI::App* cmd, Options& o, bool input, bool output) {
    if (input) {
        cmd->add_option("--input", o.input, "Input path, - for stdin")->capture_default_str();
    }
    if (output) {
        cmd->add_option("--output", o.output, "Output path, - for stdout")->capture_default_str();
    }
}

void add_raw_format(CLI::App* cmd, Options& o) {
    cmd->add_option("--format", o.format, "Raw input format")
        ->check(CLI::IsMember({"structured", "plain"}))
        ->capture_default_str();
    cmd->add_option("--source", o.source, "Source for plain input")->capture_default_str();
}

void add_parser_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--depth", o.depth, "Parse tree depth")->capture_default_str();
    cmd->add_option("--sim-threshold", o.sim_threshold, "Similarity threshold")
        ->capture_default_str();
    cmd->add_option("--max-children", o.max_children, "Branch cap per node")
        ->capture_default_str();
}

void add_detector_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--context-len", o.context_len, "Sequence context length h")
        ->capture_default_str();
    cmd->add_option("--min-support", o.min_support, "Context support needed for a verdict")
        ->capture_default_str();
    cmd->add_option("--top-g", o.top_g, "Accepted successor ranks")->capture_default_str();
    cmd->add_option("--z-threshold", o.z_threshold, "Quantitative |z| threshold")
        ->capture_default_str();
    cmd->add_option("--min-samples", o.min_samples, "Slot observations needed for a verdict")
        ->capture_default_str();
    cmd->add_option("--window", o.window, "Report context records on each side")
        ->capture_default_str();
    cmd->add_option("--reorder-window", o.reorder_window, "Per-source reorder buffer")
        ->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
    Options o;
    CLI::App app{"Log monitoring pipeline: parse, detect, classify", "monilog"};
    app.set_config("--config", "", "Config file mirroring the flags (TOML/INI)");
    app.require_subcommand(1, 1);

    auto* gen = app.add_subcommand("gen", "Generate a synthetic corpus with ground truth");
    add_io(gen, o, false, true);
    gen->add_option("--lines", o.lines, "Lines to generate")->capture_default_str();
    gen->add_option("--spec", o.spec_path, "Corpus spec JSON (default: built-in 20 templates)");
    gen->add_option("--truth", o.truth_path, "Ground-truth output path");
    gen->add_option("--seq-rate", o.seq_rate, "Sequential anomaly rate")->capture_default_str();
    gen->add_option("--quant-rate", o.quant_rate, "Quantitative anomaly rate")
        ->capture_default_str();
    gen->add_option("--seed", o.seed, "Random seed")->capture_default_str();

    auto* replay = app.add_subcommand("replay", "Replay a stream with injected noise");
    add_io(replay, o, true, true);
    add_raw_format(replay, o);
    replay->add_option("--noise-duplicate", o.noise_duplicate, "Duplicate probability")
        ->capture_default_str();
    replay->add_option("--noise-shuffle-window", o.noise_shuffle_window, "Shuffle displacement")
        ->capture_default_str();
    replay->add_option("--noise-shuffle-prob", o.noise_shuffle_prob, "Shuffle probability")
        ->capture_default_str();
    replay->add_option("--noise-twist", o.noise_twist, "Twist probability")->capture_default_str();
    replay->add_option("--seed", o.seed, "Random seed")->capture_default_str();

    auto* parse = app.add_subcommand("parse", "Parse a raw stream into templates");
    add_io(parse, o, true, true);
    add_raw_format(parse, o);
    add_parser_flags(parse, o);
    parse->add_option("--templates", o.templates_path, "Template export path");
    parse->add_option("--state", o.state_path, "Miner state, loaded if present and saved");

    auto* calib = app.add_subcommand("calibrate", "Choose parser parameters on a sample");
    add_io(calib, o, true, true);
    add_raw_format(calib, o);
    calib->add_option("--grid", o.grid, "Grid points DEPTH:SIM, comma separated");
    calib->add_option("--sample", o.sample, "Sample size (first records)")->capture_default_str();
    calib->add_option("--max-children", o.max_children, "Branch cap per node")
        ->capture_default_str();

    auto* eval = app.add_subcommand("eval", "Score a parsed stream against ground truth");
    add_io(eval, o, true, true);
    eval->add_option("--truth", o.truth_path, "Ground truth from gen")->required();
    eval->add_option("--templates", o.templates_path, "Template export from parse")->required();
    eval->add_option("--reports", o.reports_path, "Anomaly reports from detect");
    eval->add_option("--state", o.state_path, "Miner state from parse, for the params field");

    auto* detect = app.add_subcommand("detect", "Detect anomalies in a parsed stream");
    add_io(detect, o, true, true);
    add_detector_flags(detect, o);
    detect->add_option("--learn", o.learn_path, "Parsed training stream");

    auto* serve = app.add_subcommand("serve", "Run the HTTP service");
    add_parser_flags(serve, o);
    add_detector_flags(serve, o);
    serve->add_option("--port", o.port, "Listen port (0 picks one)")->capture_default_str();
    serve->add_option("--host", o.host, "Listen address")->capture_default_str();
    serve->add_option("--learn", o.learn_path, "Raw stream to train on when no snapshot exists");
    serve->add_option("--data-dir", o.data_dir, "Overrides MONILOG_DATA_DIR");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitValidation;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(o, out);
        }
        if (replay->parsed()) {
            return cmd_replay(o, in, out, err);
        }
        if (parse->parsed()) {
            return cmd_parse(o, in, out, err);
        }
        if (calib->parsed()) {
            return cmd_calibrate(o, in, out, err);
        }
        if (eval->parsed()) {
            return cmd_eval(o, in, out);
        }
        if (detect->parsed()) {
            return cmd_detect(o, in, out);
        }
        return cmd_serve(o, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

}  // namespace monilog
