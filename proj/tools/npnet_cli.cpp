// Command-line front end; talks to the library through the C API only.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "npnet.h"

namespace {

struct Cleanup {
    npnet_dataset* ds = nullptr;
    npnet_model* m1 = nullptr;
    npnet_model* m2 = nullptr;
    ~Cleanup() {
        npnet_dataset_free(ds);
        npnet_model_free(m1);
        npnet_model_free(m2);
    }
};

[[noreturn]] void die(const std::string& ctx) {
    std::fprintf(stderr, "error: %s: %s\n", ctx.c_str(), npnet_last_error());
    std::exit(1);
}

void check(npnet_status st, const std::string& ctx) {
    if (st != NPNET_OK) die(ctx);
}

using KvMap = std::map<std::string, std::string>;

KvMap load_config_file(const std::string& path) {
    KvMap kv;
    if (path.empty()) return kv;
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "error: cannot read config file %s\n", path.c_str());
        std::exit(1);
    }
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "error: bad config line '%s' (want key=value)\n", line.c_str());
            std::exit(1);
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

struct ManifestWriter {
    KvMap kv;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void set(const std::string& k, const std::string& v) { kv[k] = v; }
    void set(const std::string& k, double v) {
        std::ostringstream o;
        o.precision(17);
        o << v;
        kv[k] = o.str();
    }
    void set(const std::string& k, long v) { kv[k] = std::to_string(v); }

    void write(const std::string& path) {
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ostringstream o;
        o.precision(6);
        o << secs;
        kv["wall_clock_sec"] = o.str();
        std::ofstream out(path);
        if (!out) {
            std::fprintf(stderr, "error: cannot write manifest %s\n", path.c_str());
            std::exit(1);
        }
        for (const auto& [k, v] : kv) out << k << " " << v << "\n";
    }
};

npnet_dataset* open_dataset(const std::string& images, const std::string& labels, int subset,
                            std::uint64_t seed, ManifestWriter& man) {
    npnet_dataset* ds = nullptr;
    check(npnet_dataset_load_idx(images.c_str(), labels.c_str(), &ds), "load " + images);
    if (subset > 0 && subset < npnet_dataset_size(ds)) {
        npnet_dataset* sub = nullptr;
        check(npnet_dataset_subset(ds, subset, seed, &sub), "subset");
        npnet_dataset_free(ds);
        ds = sub;
    }
    char fp[64];
    check(npnet_dataset_fingerprint(ds, fp, sizeof fp), "fingerprint");
    man.set("dataset_fingerprint", std::string(fp));
    man.set("dataset_n", static_cast<long>(npnet_dataset_size(ds)));
    return ds;
}

std::vector<double> parse_eps_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neighborhood-preserving bottleneck networks"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand name

    std::uint64_t seed = 0;
    std::string config_path, out_dir = "runs/out";
    int subset = 0;
    app.add_option("--seed", seed, "global rng seed");
    app.add_option("--config", config_path, "key=value config file");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--subset", subset, "stratified training subset size (0 = all)");

    std::string images, labels, model_prefix, arch = "mnist", bottleneck = "np";
    int dim = 8;
    double adv_eps = 0.0;

    auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
    tr->add_option("--images", images)->required();
    tr->add_option("--labels", labels)->required();
    tr->add_option("--arch", arch, "mnist|mlp");
    tr->add_option("--bottleneck", bottleneck, "fc|np");
    tr->add_option("--dim", dim, "bottleneck width");
    tr->add_option("--adv-eps", adv_eps, "adversarial training radius (0 = off)");
    double alpha = 1.0, lr = 0.05;
    int epochs = 30, batch = 64, graph_k = 15, neg_samples = 5, init_embed_epochs = 50,
        adv_iters = 40;
    tr->add_option("--alpha", alpha);
    tr->add_option("--lr", lr);
    tr->add_option("--epochs", epochs);
    tr->add_option("--batch", batch);
    tr->add_option("--graph-k", graph_k);
    tr->add_option("--neg-samples", neg_samples);
    tr->add_option("--init-embed-epochs", init_embed_epochs);
    double init_embed_lr = 0.2;
    tr->add_option("--init-embed-lr", init_embed_lr);
    tr->add_option("--adv-iters", adv_iters);
    std::string encoder_from;
    tr->add_option("--encoder-from", encoder_from,
                   "checkpoint prefix providing pretrained encoder weights");

    std::string eps_list_str = "0,0.01,0.05,0.1,0.2";
    int iters = 40;
    bool random_start = false;
    auto* ev = app.add_subcommand("eval", "accuracy across an epsilon grid");
    ev->add_option("--model", model_prefix)->required();
    ev->add_option("--images", images)->required();
    ev->add_option("--labels", labels)->required();
    ev->add_option("--eps-list", eps_list_str);
    ev->add_option("--iters", iters);

    double eps = 0.1;
    auto* at = app.add_subcommand("attack", "single-radius attack report");
    at->add_option("--model", model_prefix)->required();
    at->add_option("--images", images)->required();
    at->add_option("--labels", labels)->required();
    at->add_option("--eps", eps);
    at->add_option("--iters", iters);
    at->add_flag("--random-start", random_start);

    int clusters = 100;
    auto* co = app.add_subcommand("compress", "cluster the reference table");
    co->add_option("--model", model_prefix)->required();
    co->add_option("--images", images)->required();
    co->add_option("--labels", labels)->required();
    co->add_option("--clusters", clusters, "clusters per class");

    int np_points = 100, np_dirs = 200, fc_n = 2000, fc_p = 100, fc_d = 8, fc_seeds = 20;
    double h_step = 1e-4;
    bool fc_check = false;
    auto* an = app.add_subcommand("analyze", "empirical bound checks");
    an->add_option("--model", model_prefix, "checkpoint prefix for the table check");
    an->add_option("--np-points", np_points);
    an->add_option("--np-dirs", np_dirs);
    an->add_option("--h-step", h_step);
    an->add_flag("--fc-check", fc_check, "run the synthetic least-squares bound check");
    an->add_option("--fc-n", fc_n);
    an->add_option("--fc-p", fc_p);
    an->add_option("--fc-d", fc_d);
    an->add_option("--fc-seeds", fc_seeds);

    auto* ie = app.add_subcommand("init-embed", "graph-loss-only embedding of a flat dataset");
    ie->add_option("--images", images)->required();
    ie->add_option("--labels", labels)->required();
    ie->add_option("--dim", dim);
    ie->add_option("--epochs", epochs);

    std::string synth_kind = "blobs";
    int synth_n = 1000, synth_p = 16, synth_classes = 4;
    double synth_noise = 0.05;
    auto* sy = app.add_subcommand("synth", "write a synthetic dataset as idx files");
    sy->add_option("--kind", synth_kind, "blobs|moons");
    sy->add_option("--n", synth_n, "total point count");
    sy->add_option("--p", synth_p, "blob dimension");
    sy->add_option("--classes", synth_classes);
    sy->add_option("--noise", synth_noise);

    CLI11_PARSE(app, argc, argv);

    std::filesystem::create_directories(out_dir);
    ManifestWriter man;
    man.set("seed", static_cast<long>(seed));
    KvMap file_cfg = load_config_file(config_path);
    Cleanup gc;

    if (tr->parsed()) {
        if (adv_eps > 0.0 && adv_iters <= 0) {
            std::fprintf(stderr, "error: --adv-eps requires a positive --adv-iters\n");
            return 1;
        }
        man.set("command", "train");
        gc.ds = open_dataset(images, labels, subset, seed, man);
        KvMap kv = file_cfg;
        auto num = [](double v) {
            std::ostringstream o;
            o.precision(17);
            o << v;
            return o.str();
        };
        kv["alpha"] = num(alpha);
        kv["lr"] = num(lr);
        kv["epochs"] = std::to_string(epochs);
        kv["batch"] = std::to_string(batch);
        kv["graph_k"] = std::to_string(graph_k);
        kv["neg_samples"] = std::to_string(neg_samples);
        kv["init_embed_epochs"] = std::to_string(init_embed_epochs);
        kv["init_embed_lr"] = num(init_embed_lr);
        kv["seed"] = std::to_string(seed);
        if (adv_eps > 0.0) {
            kv["adv_eps"] = num(adv_eps);
            kv["adv_iters"] = std::to_string(adv_iters);
        }
        if (!encoder_from.empty()) kv["encoder_from"] = encoder_from;
        std::vector<const char*> ks, vs;
        for (const auto& [k, v] : kv) {
            ks.push_back(k.c_str());
            vs.push_back(v.c_str());
            man.set("cfg." + k, v);
        }
        man.set("arch", arch);
        man.set("bottleneck", bottleneck);
        man.set("dim", static_cast<long>(dim));
        std::string loss_csv = out_dir + "/loss.csv";
        check(npnet_train(gc.ds, arch.c_str(), bottleneck.c_str(), dim, ks.data(), vs.data(),
                          static_cast<int>(ks.size()), loss_csv.c_str(), &gc.m1),
              "train");
        std::string prefix = out_dir + "/model";
        check(npnet_model_save(gc.m1, prefix.c_str()), "save model");
        man.set("checkpoint", prefix);
        man.set("loss_csv", loss_csv);
        man.write(out_dir + "/run.manifest");
        std::printf("trained %s bottleneck, checkpoint at %s\n", bottleneck.c_str(),
                    prefix.c_str());
        return 0;
    }

    if (ev->parsed() || at->parsed()) {
        man.set("command", ev->parsed() ? "eval" : "attack");
        gc.ds = open_dataset(images, labels, subset, seed, man);
        check(npnet_model_load(model_prefix.c_str(), &gc.m1), "load model");
        const char* name = npnet_model_is_np(gc.m1) ? "np" : "fc";
        std::vector<double> grid =
            ev->parsed() ? parse_eps_list(eps_list_str) : std::vector<double>{eps};
        std::string csv_path = out_dir + (ev->parsed() ? "/report.csv" : "/attack.csv");
        std::ofstream csv(csv_path);
        csv << "eps,model,accuracy,n\n";
        int n = npnet_dataset_size(gc.ds);
        for (double e : grid) {
            double acc = 0.0;
            if (e == 0.0)
                check(npnet_model_accuracy(gc.m1, gc.ds, &acc), "accuracy");
            else
                check(npnet_model_attack_accuracy(gc.m1, gc.ds, e, e / 10.0, iters,
                                                  random_start ? 1 : 0, seed, &acc),
                      "attack accuracy");
            csv << e << "," << name << "," << acc << "," << n << "\n";
            std::printf("eps=%g %s accuracy %.4f (n=%d)\n", e, name, acc, n);
        }
        if (at->parsed()) {
            double gap = 0.0;
            check(npnet_model_distortion_gap(gc.m1, gc.ds, eps, eps / 10.0, iters, &gap),
                  "distortion gap");
            man.set("distortion_gap", gap);
            std::printf("distortion gap %.6f\n", gap);
        }
        man.set("checkpoint", model_prefix);
        man.set("report_csv", csv_path);
        man.write(out_dir + "/run.manifest");
        return 0;
    }

    if (co->parsed()) {
        man.set("command", "compress");
        gc.ds = open_dataset(images, labels, subset, seed, man);
        check(npnet_model_load(model_prefix.c_str(), &gc.m1), "load model");
        check(npnet_model_compress(gc.m1, gc.ds, clusters, seed, &gc.m2), "compress");
        std::string prefix = out_dir + "/model_ref";
        check(npnet_model_save(gc.m2, prefix.c_str()), "save model");
        man.set("checkpoint", model_prefix);
        man.set("compressed_checkpoint", prefix);
        man.set("clusters_per_class", static_cast<long>(clusters));
        man.write(out_dir + "/run.manifest");
        std::printf("compressed checkpoint at %s\n", prefix.c_str());
        return 0;
    }

    if (an->parsed()) {
        man.set("command", "analyze");
        std::string csv_path = out_dir + "/bounds.csv";
        std::ofstream csv(csv_path);
        csv << "check,seed,C1,C2,C4,C5,T1,T2,points,probes,excluded,violations\n";
        double t1 = 0.0, t2 = 0.0;
        bool have_t1 = false, have_t2 = false;
        if (!model_prefix.empty()) {
            check(npnet_model_load(model_prefix.c_str(), &gc.m1), "load model");
            npnet_bound_report rep;
            check(npnet_model_np_bound_check(gc.m1, np_points, np_dirs, h_step, seed, &rep),
                  "table bound check");
            csv << "np," << seed << "," << rep.C1 << "," << rep.C2 << "," << rep.C4 << ",,"
                << rep.T1 << ",," << rep.points << "," << rep.probes << "," << rep.excluded
                << "," << rep.violations << "\n";
            std::printf("table check: T1=%.6f probes=%d excluded=%d violations=%d\n", rep.T1,
                        rep.probes, rep.excluded, rep.violations);
            t1 = rep.T1;
            have_t1 = true;
            man.set("np_violations", static_cast<long>(rep.violations));
        }
        if (fc_check) {
            int sat = 0;
            for (int s = 0; s < fc_seeds; ++s) {
                npnet_bound_report rep;
                check(npnet_fc_synth_check(fc_n, fc_p, fc_d, seed + s, &rep), "fc bound check");
                csv << "fc," << (seed + s) << ",,,," << rep.C5 << ",," << rep.T2 << ","
                    << rep.points << ",,," << rep.violations << "\n";
                if (rep.violations == 0) ++sat;
                t2 = std::max(t2, rep.T2);
                have_t2 = true;
            }
            std::printf("dense-layer check: %d/%d trials satisfied\n", sat, fc_seeds);
            man.set("fc_satisfied", static_cast<long>(sat));
        }
        std::ofstream sum(out_dir + "/summary.txt");
        if (have_t1) sum << "T1 " << t1 << "\n";
        if (have_t2) sum << "T2 " << t2 << "\n";
        if (have_t1 && have_t2 && t2 != 0.0) sum << "T1/T2 " << t1 / t2 << "\n";
        man.set("bounds_csv", csv_path);
        man.write(out_dir + "/run.manifest");
        return 0;
    }

    if (ie->parsed()) {
        man.set("command", "init-embed");
        gc.ds = open_dataset(images, labels, subset, seed, man);
        std::string ep = std::to_string(epochs), sd = std::to_string(seed);
        const char* ks[] = {"epochs", "seed"};
        const char* vs[] = {ep.c_str(), sd.c_str()};
        std::string csv_path = out_dir + "/embed.csv";
        check(npnet_init_embed(gc.ds, dim, ks, vs, 2, csv_path.c_str()), "init-embed");
        man.set("embed_csv", csv_path);
        man.write(out_dir + "/run.manifest");
        std::printf("embedding written to %s\n", csv_path.c_str());
        return 0;
    }

    if (sy->parsed()) {
        man.set("command", "synth");
        if (synth_kind == "blobs") {
            check(npnet_dataset_synth_blobs(synth_classes, synth_p, synth_n, synth_noise, seed,
                                            &gc.ds),
                  "synth blobs");
        } else if (synth_kind == "moons") {
            check(npnet_dataset_synth_moons(synth_n, synth_noise, seed, &gc.ds), "synth moons");
        } else {
            std::fprintf(stderr, "error: --kind must be blobs or moons\n");
            return 1;
        }
        std::string ip = out_dir + "/synth_images.idx", lp = out_dir + "/synth_labels.idx";
        check(npnet_dataset_save_idx(gc.ds, ip.c_str(), lp.c_str()), "save idx");
        char fp[64];
        check(npnet_dataset_fingerprint(gc.ds, fp, sizeof fp), "fingerprint");
        man.set("dataset_fingerprint", std::string(fp));
        man.set("images", ip);
        man.set("labels", lp);
        man.write(out_dir + "/run.manifest");
        std::printf("wrote %s and %s (n=%d)\n", ip.c_str(), lp.c_str(),
                    npnet_dataset_size(gc.ds));
        return 0;
    }

    return 0;
}
