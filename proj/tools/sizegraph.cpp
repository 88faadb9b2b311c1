// sizegraph: command-line front end for the footwear size recommender.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "sizegraph/sizegraph.hpp"
#include "sizegraph/server.hpp"

namespace fs = std::filesystem;
using namespace sizegraph;

namespace {

struct CategoryFlags {
  std::string gender;
  std::string article_type;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--gender", gender, "Men or Women");
    cmd->add_option("--article-type", article_type, "Article type, e.g. \"Sports Shoes\"");
  }

  std::optional<Category> get() const {
    if (gender.empty() && article_type.empty()) return std::nullopt;
    auto g = parse_gender(gender);
    if (!g) throw Error(ErrorCode::InvalidArgument, "--gender must be Men or Women");
    return Category(*g, article_type);
  }

  Category require() const {
    auto c = get();
    if (!c) throw Error(ErrorCode::InvalidArgument, "--gender and --article-type are required");
    return *c;
  }
};

std::string bundle_slug(const Category& c) {
  std::string slug = std::string(to_string(c.gender())) + "_" + c.article_type();
  for (char& ch : slug) {
    if (ch == ' ' || ch == '/') ch = '_';
  }
  return slug + ".bundle.json";
}

/// --bundle wins; otherwise $SIZEGRAPH_MODEL_DIR/<Gender>_<Article_Type>.bundle.json.
std::string resolve_bundle_path(const std::string& flag, const CategoryFlags& cat) {
  if (!flag.empty()) return flag;
  const char* dir = std::getenv("SIZEGRAPH_MODEL_DIR");
  if (dir == nullptr || *dir == '\0') {
    throw Error(ErrorCode::InvalidArgument, "no --bundle given and SIZEGRAPH_MODEL_DIR is unset");
  }
  return (fs::path(dir) / bundle_slug(cat.require())).string();
}

ModelBundle load_checked(const std::string& path, const CategoryFlags& cat) {
  auto bundle = load_bundle(path);
  if (auto c = cat.get(); c && !(*c == bundle.category)) {
    throw Error(ErrorCode::InvalidArgument,
                "bundle is for " + bundle.category.label() + ", not " + c->label());
  }
  return bundle;
}

EventFormat format_for(const std::string& path, const std::string& flag) {
  if (flag == "csv") return EventFormat::Csv;
  if (flag == "jsonl") return EventFormat::Jsonl;
  if (!flag.empty()) throw Error(ErrorCode::InvalidArgument, "--format must be jsonl or csv");
  return fs::path(path).extension() == ".csv" ? EventFormat::Csv : EventFormat::Jsonl;
}

ParseResult read_events(const std::string& path, const std::string& format_flag = "") {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_events(in, format_for(path, format_flag));
}

std::vector<InteractionEvent> read_all(const std::vector<std::string>& paths) {
  std::vector<InteractionEvent> out;
  for (const auto& p : paths) {
    auto r = read_events(p);
    if (!r.rejected.empty()) {
      std::cerr << "warning: " << r.rejected.size() << " malformed lines skipped in " << p << "\n";
    }
    out.insert(out.end(), std::make_move_iterator(r.events.begin()),
               std::make_move_iterator(r.events.end()));
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::Io, "write failed: " + path);
}

void write_events_file(const std::string& path, const std::vector<InteractionEvent>& events) {
  std::ostringstream os;
  write_events_jsonl(os, events);
  write_file(path, os.str());
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (detail::trim(item).empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Footwear size recommendation from co-purchase and brand-similarity graphs"};
  app.require_subcommand(1);

  std::uint64_t seed = 42;
  CategoryFlags cat;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse and normalize an event file");
  std::string ingest_in, ingest_out, ingest_report, ingest_format;
  ingest->add_option("--events", ingest_in, "Raw events (jsonl or csv)")->required();
  ingest->add_option("--out", ingest_out, "Normalized event store (jsonl)")->required();
  ingest->add_option("--report", ingest_report, "Parse report path (default <out>.report.jsonl)");
  ingest->add_option("--format", ingest_format, "jsonl or csv (default: by extension)");
  cat.add_to(ingest);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic world with ground truth");
  std::string synth_dir;
  std::size_t synth_users = 2000, synth_brands = 20, synth_bands = 1;
  double synth_purchases = 8.0, synth_noise = 0.0, synth_in_band = 0.9;
  synth->add_option("--out-dir", synth_dir, "Output directory")->required();
  synth->add_option("--users", synth_users);
  synth->add_option("--brands", synth_brands);
  synth->add_option("--bands", synth_bands, "Number of price bands");
  synth->add_option("--purchases", synth_purchases, "Mean purchases per user");
  synth->add_option("--noise", synth_noise, "Probability a purchase is off by half a size");
  synth->add_option("--in-band", synth_in_band, "Probability of buying inside the user's band");
  synth->add_option("--seed", seed);
  cat.add_to(synth);

  // split
  auto* split = app.add_subcommand("split", "Split orders into train and test sets");
  std::string split_orders_path, split_train, split_test;
  double split_fraction = 0.1;
  split->add_option("--orders", split_orders_path)->required();
  split->add_option("--test-fraction", split_fraction);
  split->add_option("--train-out", split_train)->required();
  split->add_option("--test-out", split_test)->required();
  split->add_option("--seed", seed);
  cat.add_to(split);

  // build
  auto* build = app.add_subcommand("build", "Build brand and size graphs into a model bundle");
  std::vector<std::string> build_events;
  std::string build_out, build_weighting = "frequency";
  BuildOptions bopt;
  double build_alpha = -1.0;
  build->add_option("--events", build_events, "Event/order files (repeatable)")->required();
  build->add_option("--out", build_out, "Bundle path (default under SIZEGRAPH_MODEL_DIR)");
  build->add_option("--rank", bopt.rank, "NMF rank");
  build->add_option("--nmf-iters", bopt.nmf_max_iters);
  build->add_option("--nmf-tol", bopt.nmf_tol);
  build->add_option("--alpha", build_alpha, "Explicit edge-strength threshold");
  build->add_option("--alpha-percentile", bopt.alpha_percentile, "Percentile of edge weights");
  build->add_option("--lambda", bopt.lambda, "Softmax threshold");
  build->add_option("--leg-weighting", build_weighting, "frequency, raw-count or softmax");
  build->add_flag("--normalize-similarity", bopt.normalize_similarity, "Cosine brand similarity");
  build->add_option("--seed", seed);
  cat.add_to(build);

  // train-skipgram
  auto* train = app.add_subcommand("train-skipgram", "Train the skip-gram baseline into a bundle");
  std::string train_bundle, train_out;
  std::vector<std::string> train_events;
  SkipGramConfig sg;
  train->add_option("--bundle", train_bundle);
  train->add_option("--events", train_events, "Order files (repeatable)")->required();
  train->add_option("--out", train_out, "Output bundle (default: overwrite input)");
  train->add_option("--dims", sg.dims);
  train->add_option("--window", sg.window);
  train->add_option("--epochs", sg.epochs);
  train->add_option("--lr", sg.learning_rate);
  train->add_option("--negatives", sg.negatives);
  train->add_option("--seed", seed);
  cat.add_to(train);

  // recommend
  auto* rec = app.add_subcommand("recommend", "Recommend a size in a target brand");
  std::string rec_bundle, rec_brand, rec_target, rec_method = "wbsr", rec_queries;
  double rec_size = 0.0;
  rec->add_option("--bundle", rec_bundle);
  rec->add_option("--brand", rec_brand, "Preferred brand");
  rec->add_option("--size", rec_size, "UK size worn in the preferred brand");
  rec->add_option("--target", rec_target, "Brand to recommend a size for");
  rec->add_option("--method", rec_method, "wbsr, skipgram or both");
  rec->add_option("--queries", rec_queries, "Batch file of {brand,size,target,method} lines");
  cat.add_to(rec);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Offline accuracy and coverage on held-out orders");
  std::string eval_bundle, eval_train, eval_test, eval_method = "both", eval_json;
  eval->add_option("--bundle", eval_bundle);
  eval->add_option("--train", eval_train, "Train orders (for questionnaire proxies)")->required();
  eval->add_option("--test", eval_test, "Held-out orders")->required();
  eval->add_option("--method", eval_method, "wbsr, skipgram, direct-only or both");
  eval->add_option("--json-out", eval_json, "Write the machine-readable report here");
  cat.add_to(eval);

  // sweeps
  auto* sa = app.add_subcommand("sweep-alpha", "Accuracy across alpha percentiles at fixed lambda");
  auto* sl = app.add_subcommand("sweep-lambda", "Accuracy across lambda at fixed alpha");
  std::string sw_bundle, sw_train, sw_valid, sw_percentiles = "60,65,70,75,80",
                                               sw_lambdas = "0.5,0.6,0.7,0.8,0.9", sw_json;
  double sw_lambda = kDefaultLambda, sw_alpha = -1.0, sw_alpha_pct = 75.0;
  for (auto* cmd : {sa, sl}) {
    cmd->add_option("--bundle", sw_bundle);
    cmd->add_option("--train", sw_train)->required();
    cmd->add_option("--validation", sw_valid)->required();
    cmd->add_option("--json-out", sw_json);
    cmd->add_option("--seed", seed);
    cat.add_to(cmd);
  }
  sa->add_option("--percentiles", sw_percentiles);
  sa->add_option("--lambda", sw_lambda);
  sl->add_option("--lambdas", sw_lambdas);
  sl->add_option("--alpha", sw_alpha);
  sl->add_option("--alpha-percentile", sw_alpha_pct);

  // serve
  auto* serve = app.add_subcommand("serve", "Serve POST /recommend and GET /healthz");
  std::string serve_bundle, serve_listen = "127.0.0.1:8080";
  serve->add_option("--bundle", serve_bundle);
  serve->add_option("--listen", serve_listen, "host:port (port 0 picks a free port)");
  cat.add_to(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : exit_code::kUsage;
  }

  try {
    if (*ingest) {
      auto parsed = read_events(ingest_in, ingest_format);
      auto events = std::move(parsed.events);
      if (auto c = cat.get()) events = filter_category(events, *c);
      write_events_file(ingest_out, events);
      std::ostringstream report;
      write_parse_report(report, parsed.rejected);
      write_file(ingest_report.empty() ? ingest_out + ".report.jsonl" : ingest_report, report.str());
      std::cout << nlohmann::json{{"accepted", events.size()}, {"rejected", parsed.rejected.size()}}
                       .dump()
                << "\n";
      return exit_code::kOk;
    }

    if (*synth) {
      auto cfg = SynthConfig::with_defaults(synth_brands, synth_bands, seed);
      cfg.n_users = synth_users;
      cfg.purchases_per_user = synth_purchases;
      cfg.noise_rate = synth_noise;
      cfg.in_band_rate = synth_in_band;
      if (auto c = cat.get()) cfg.category = *c;
      const auto data = synth_generate(cfg);
      fs::create_directories(synth_dir);
      write_events_file((fs::path(synth_dir) / "events.jsonl").string(), data.events);
      write_events_file((fs::path(synth_dir) / "orders.jsonl").string(), data.orders);
      std::ostringstream truth;
      write_ground_truth(truth, data.truth);
      write_file((fs::path(synth_dir) / "truth.jsonl").string(), truth.str());
      std::cout << nlohmann::json{{"events", data.events.size()}, {"orders", data.orders.size()}}
                       .dump()
                << "\n";
      return exit_code::kOk;
    }

    if (*split) {
      auto orders = read_all({split_orders_path});
      if (auto c = cat.get()) orders = filter_category(orders, *c);
      auto parts = split_orders(orders, split_fraction, seed);
      write_events_file(split_train, parts.train);
      write_events_file(split_test, parts.test);
      std::cout << nlohmann::json{{"train", parts.train.size()}, {"test", parts.test.size()}}.dump()
                << "\n";
      return exit_code::kOk;
    }

    if (*build) {
      const auto category = cat.require();
      bopt.seed = seed;
      if (build_alpha >= 0.0) bopt.alpha = build_alpha;
      auto w = parse_leg_weighting(build_weighting);
      if (!w) throw Error(ErrorCode::InvalidArgument, "unknown --leg-weighting " + build_weighting);
      bopt.leg_weighting = *w;
      const auto bundle = build_bundle(read_all(build_events), category, bopt);
      const auto out = resolve_bundle_path(build_out, cat);
      save_bundle(bundle, out);
      std::cout << nlohmann::json{{"bundle", out},
                                  {"events_fingerprint", bundle.metadata.events_fingerprint},
                                  {"alpha", bundle.hyperparams.alpha.alpha},
                                  {"lambda", bundle.hyperparams.lambda},
                                  {"brands", bundle.size_graph.brands().size()}}
                       .dump()
                << "\n";
      return exit_code::kOk;
    }

    if (*train) {
      const auto in_path = resolve_bundle_path(train_bundle, cat);
      auto bundle = load_checked(in_path, cat);
      sg.seed = seed;
      attach_skipgram(bundle, read_all(train_events), sg);
      const auto out = train_out.empty() ? in_path : train_out;
      save_bundle(bundle, out);
      std::cout << nlohmann::json{{"bundle", out}, {"vocab", bundle.skipgram->vocab().size()}}.dump()
                << "\n";
      return exit_code::kOk;
    }

    if (*rec) {
      const auto bundle = load_checked(resolve_bundle_path(rec_bundle, cat), cat);
      if (!rec_queries.empty()) {
        std::ifstream in(rec_queries);
        if (!in) throw Error(ErrorCode::Io, "cannot open " + rec_queries);
        std::string line;
        int worst = exit_code::kOk;
        while (std::getline(in, line)) {
          if (detail::trim(line).empty()) continue;
          std::string problem;
          auto q = parse_query_body(line, problem);
          if (!q) throw Error(ErrorCode::InvalidArgument, "bad query line: " + problem);
          const auto a = answer_query(bundle, *q);
          std::cout << a.body << "\n";
          worst = std::max(worst, a.exit_code);
        }
        return worst;
      }
      auto method = parse_query_method(rec_method);
      if (!method) throw Error(ErrorCode::InvalidArgument, "--method must be wbsr, skipgram or both");
      if (rec_brand.empty() || rec_target.empty()) {
        throw Error(ErrorCode::InvalidArgument, "--brand, --size and --target are required");
      }
      const auto a = answer_query(bundle, Query{rec_brand, rec_size, rec_target, *method});
      (a.exit_code == exit_code::kOk ? std::cout : std::cerr) << a.body << "\n";
      return a.exit_code;
    }

    if (*eval) {
      const auto bundle = load_checked(resolve_bundle_path(eval_bundle, cat), cat);
      const auto train_orders = read_all({eval_train});
      const auto test_orders = read_all({eval_test});
      std::optional<EvalReport> wbsr, skip, direct;
      if (eval_method == "wbsr" || eval_method == "both") {
        wbsr = evaluate(EvalMethod::Wbsr, bundle, train_orders, test_orders);
      }
      // "both" quietly skips the baseline when the bundle carries no skip-gram model.
      if (eval_method == "skipgram" || (eval_method == "both" && bundle.skipgram)) {
        skip = evaluate(EvalMethod::SkipGram, bundle, train_orders, test_orders);
      }
      if (eval_method == "direct-only") {
        direct = evaluate(EvalMethod::DirectOnly, bundle, train_orders, test_orders);
      }
      if (!wbsr && !skip && !direct) {
        throw Error(ErrorCode::InvalidArgument, "unknown --method " + eval_method);
      }
      nlohmann::json doc = nlohmann::json::array();
      for (const auto* r : {&wbsr, &skip, &direct}) {
        if (*r) doc.push_back(to_json(**r));
      }
      if (!eval_json.empty()) write_file(eval_json, doc.dump(1) + "\n");
      std::cout << accuracy_table(bundle.category, skip, wbsr ? wbsr : direct);
      std::cout << doc.dump() << "\n";
      return exit_code::kOk;
    }

    if (*sa || *sl) {
      const auto bundle = load_checked(resolve_bundle_path(sw_bundle, cat), cat);
      const auto train_orders = read_all({sw_train});
      const auto valid = read_all({sw_valid});
      std::vector<SweepRow> rows;
      if (*sa) {
        rows = sweep_alpha(parse_list(sw_percentiles), sw_lambda, bundle, train_orders, valid);
      } else {
        const double alpha = sw_alpha >= 0.0
                                 ? sw_alpha
                                 : alpha_from_percentile(bundle.size_graph, sw_alpha_pct).alpha;
        rows = sweep_lambda(parse_list(sw_lambdas), alpha, bundle, train_orders, valid);
      }
      const auto doc = sweep_to_json(rows, sa->parsed());
      if (!sw_json.empty()) write_file(sw_json, doc.dump(1) + "\n");
      std::cout << sweep_table(rows, sa->parsed());
      std::cout << doc.dump() << "\n";
      return exit_code::kOk;
    }

    if (*serve) {
      const auto bundle = load_checked(resolve_bundle_path(serve_bundle, cat), cat);
      const auto colon = serve_listen.rfind(':');
      if (colon == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "--listen must be host:port");
      }
      const auto host = serve_listen.substr(0, colon);
      const int port = std::stoi(serve_listen.substr(colon + 1));
      httplib::Server server;
      install_routes(server, bundle);
      int bound = port;
      if (port == 0) {
        bound = server.bind_to_any_port(host);
        if (bound <= 0) {
          std::cerr << "cannot bind " << serve_listen << "\n";
          return exit_code::kIo;
        }
      } else if (!server.bind_to_port(host, port)) {
        std::cerr << "cannot bind " << serve_listen << "\n";
        return exit_code::kIo;
      }
      std::cout << "listening " << host << ":" << bound << std::endl;
      server.listen_after_bind();
      return exit_code::kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code::kUsage;
  }
  return exit_code::kOk;
}
