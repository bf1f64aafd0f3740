// SPDX-License-Identifier: Apache-2.0
//
// qcal — calibration pipeline CLI for the simulated two-qubit device.
//
// Subcommands: autorabi, finetune, crsweep, xyfit, rb, pipeline.
// Each stage appends a record to the JSON-lines store and writes a JSON +
// CSV artifact pair into the output directory. `pipeline` runs all five
// stages in dependency order. All randomness comes from the configured
// seed, so identical config + seed reruns produce byte-identical record
// payloads (wall-clock timestamps live only in the store envelope).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qcal/autorabi.hpp"
#include "qcal/errors.hpp"
#include "qcal/protocols.hpp"
#include "qcal/qmatrix.hpp"
#include "qcal/rb.hpp"
#include "qcal/record.hpp"
#include "qcal/rng.hpp"
#include "qcal/simdev.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcal;

namespace {

constexpr const char* kSoftwareVersion = "qcal 0.1.0";

// ---------------------------------------------------------------------------
// small serialization helpers

json bias_to_json(const sim::QubitBias& b) {
    return json{{"f_q", b.f_q}, {"f_r", b.f_r}, {"a_r", b.a_r}, {"readout_amp", b.readout_amp}};
}

sim::QubitBias bias_from_json(const json& j) {
    sim::QubitBias b;
    b.f_q = j.at("f_q").get<double>();
    b.f_r = j.at("f_r").get<double>();
    b.a_r = j.at("a_r").get<double>();
    b.readout_amp = j.value("readout_amp", 0.8);
    return b;
}

json angles_to_json(const qm::CnotAngles& a) {
    return json{{"theta1", a.theta1},
                {"theta2", a.theta2},
                {"theta3", a.theta3},
                {"theta4", a.theta4},
                {"branch", a.branch == qm::Branch::Primary ? "primary" : "phase_pi_half"}};
}

json xyfit_to_json(const proto::XyFit& f) {
    return json{{"primary", angles_to_json(f.primary)},
                {"secondary", angles_to_json(f.secondary)},
                {"std_err", f.std_err},
                {"chi2_ndf", f.chi2_ndf}};
}

json loss_to_json(const ar::LossBreakdown& l) {
    return json{{"l_f", l.l_f},   {"l_ac", l.l_ac},   {"l_t", l.l_t},
                {"l_bic", l.l_bic}, {"l_tot", l.l_tot}, {"delta", l.delta}};
}

json rabifit_to_json(const fit::RabiFit& f) {
    return json{{"c", f.c},     {"a", f.a},           {"tau", f.tau},   {"f", f.f},
                {"phi0", f.phi0}, {"chi2_ndf", f.chi2_ndf}, {"t_x90", f.t_x90}};
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out.is_open()) throw IoError("cannot write " + path.string());
    out << text;
    if (!out.good()) throw IoError("short write on " + path.string());
}

void write_json_artifact(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// RFC-4180-style CSV: header + preformatted rows (all our fields are
// numeric or plain identifiers, so no quoting is ever needed).
void write_csv(const fs::path& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::string text = header + "\n";
    for (const std::string& r : rows) text += r + "\n";
    write_text_file(path, text);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// configuration

struct Ctx {
    json cfg = json::object();
    fs::path out_dir = "out";
    std::unique_ptr<rec::RecordStore> store;
    sim::Backend backend;
    std::uint64_t seed = 1;
    rb::NoiseSpec inject;
    bool inject_given = false;
};

json cfg_section(const Ctx& ctx, const std::string& name) {
    return ctx.cfg.contains(name) ? ctx.cfg.at(name) : json::object();
}

rb::NoiseSpec parse_inject(const std::string& spec) {
    rb::NoiseSpec n;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--inject expects name=value pairs, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const double val = std::stod(item.substr(eq + 1));
        if (key == "depolarizing")
            n.depolarizing = val;
        else if (key == "amp_damp")
            n.amp_damp = val;
        else if (key == "coherent")
            n.coherent = val;
        else
            throw std::invalid_argument(
                "--inject: unknown channel '" + key +
                "' (expected depolarizing, amp_damp, or coherent)");
    }
    return n;
}

rec::Provenance prov_for(const Ctx& ctx, const std::string& stage) {
    rec::Provenance p;
    p.run_id = stage + "-s" + std::to_string(ctx.seed);
    p.seed = ctx.seed;
    p.software = kSoftwareVersion;
    return p;
}

std::string run_ref(const rec::CalibrationRecord& r) {
    return r.prov.run_id + "#v" + std::to_string(r.version);
}

rec::CalibrationRecord need_record(const Ctx& ctx, const std::string& id,
                                   const std::string& stage, const std::string& for_stage) {
    auto r = ctx.store->latest(id, stage);
    if (!r)
        throw DependencyError(for_stage + " is missing its prerequisite: no " + stage +
                              " record for " + id + " in the store (" +
                              ctx.store->path().string() + "); run `qcal " + stage + "` first");
    return *r;
}

// restore the operating point chosen by the autorabi stage
rec::CalibrationRecord apply_recorded_bias(Ctx& ctx, int qubit, const std::string& for_stage) {
    rec::CalibrationRecord r =
        need_record(ctx, "q" + std::to_string(qubit), "autorabi", for_stage);
    ctx.backend.set_bias(qubit, bias_from_json(r.data.at("final_bias")));
    return r;
}

// ---------------------------------------------------------------------------
// stages

int stage_autorabi(Ctx& ctx) {
    const json sc = cfg_section(ctx, "autorabi");
    if (!sc.contains("initial_bias"))
        throw std::invalid_argument(
            "config: autorabi.initial_bias is required (per-qubit starting operating points)");
    rng::Stream root(ctx.seed);

    std::vector<int> qubits = sc.value("qubits", std::vector<int>{0, 1});
    for (int q : qubits) {
        if (q < 0 || q > 1) throw std::invalid_argument("config: qubit index must be 0 or 1");
        const sim::QubitBias initial =
            bias_from_json(sc.at("initial_bias").at(static_cast<std::size_t>(q)));

        ar::AutoRabiOptions opts;
        opts.scan = ar::ScanConfig::defaults();
        opts.scan.qubit = q;
        opts.scan.shots = sc.value("shots", 400);
        opts.budget = sc.value("budget", 40);
        if (sc.contains("brackets")) {
            opts.brackets.f_q_ghz = sc.at("brackets").value("f_q", 0.002);
            opts.brackets.f_r_ghz = sc.at("brackets").value("f_r", 0.002);
            opts.brackets.a_r = sc.at("brackets").value("a_r", 0.3);
        }
        opts.seed = root.fork(10 + static_cast<std::uint64_t>(q)).key();

        const fs::path run_dir = ctx.out_dir / ("autorabi_q" + std::to_string(q));
        fs::create_directories(run_dir);
        opts.archive = [&run_dir](const ar::IterationRecord& it) {
            json j;
            j["evaluation"] = it.evaluation;
            j["bias"] = bias_to_json(it.bias);
            j["fit_ok"] = it.eval.fit_ok;
            if (it.eval.fit_ok) j["fit"] = rabifit_to_json(it.eval.fit);
            if (!it.eval.failure.empty()) j["failure"] = it.eval.failure;
            json bic = json::object();
            for (const auto& [k, v] : it.eval.clusters.bic_by_k) bic[std::to_string(k)] = v;
            j["bic_by_k"] = bic;
            j["best_k"] = it.eval.clusters.best_k;
            j["loss"] = loss_to_json(it.eval.loss);
            char name[32];
            std::snprintf(name, sizeof name, "eval_%03d.json", it.evaluation);
            write_json_artifact(run_dir / name, j);
        };

        std::fprintf(stderr, "autorabi q%d: budget %d, shots %d\n", q, opts.budget,
                     opts.scan.shots);
        const ar::AutoRabiResult res = ar::autorabi(initial, ctx.backend, opts);
        ctx.backend.set_bias(q, res.final_bias);

        json iters = json::array();
        std::vector<std::string> rows;
        for (const ar::IterationRecord& it : res.iterations) {
            iters.push_back(json{{"evaluation", it.evaluation}, {"l_tot", it.eval.loss.l_tot}});
            rows.push_back(std::to_string(it.evaluation) + "," + fmt(it.eval.loss.l_tot));
        }

        json data;
        data["initial_bias"] = bias_to_json(res.initial_bias);
        data["final_bias"] = bias_to_json(res.final_bias);
        data["initial_loss"] = loss_to_json(res.initial_loss);
        data["final_loss"] = loss_to_json(res.final_loss);
        data["evaluations"] = res.iterations.size();
        data["fit"] = rabifit_to_json(res.final_eval.fit);

        const auto rec =
            ctx.store->append("q" + std::to_string(q), "autorabi", prov_for(ctx, "autorabi"), data);

        json art = data;
        art["iterations"] = iters;
        write_json_artifact(ctx.out_dir / ("autorabi_q" + std::to_string(q) + ".json"), art);
        write_csv(ctx.out_dir / ("autorabi_q" + std::to_string(q) + ".csv"), "iteration,l_tot",
                  rows);
        std::fprintf(stderr,
                     "autorabi q%d: l_tot %.4f -> %.4f over %d evaluations (record %s)\n", q,
                     res.initial_loss.l_tot, res.final_loss.l_tot,
                     static_cast<int>(res.iterations.size()), run_ref(rec).c_str());
    }
    return 0;
}

int stage_finetune(Ctx& ctx) {
    const json sc = cfg_section(ctx, "finetune");
    const double lo = sc.value("coarse_lo", 0.30);
    const double hi = sc.value("coarse_hi", 0.55);
    const int coarse_points = sc.value("coarse_points", 15);
    const int fine_points = sc.value("fine_points", 17);
    const double window = sc.value("fine_window_frac", 0.08);
    const int shots = sc.value("shots", 2000);
    rng::Stream root(ctx.seed);

    for (int q = 0; q < 2; ++q) {
        const auto arec = apply_recorded_bias(ctx, q, "finetune");

        json data;
        data["autorabi_run"] = run_ref(arec);
        std::vector<std::string> rows;
        json curves = json::array();
        int curve_points = 0;

        const struct {
            sim::GateKind gate;
            const char* name;
            int coarse_stack, fine_stack;
        } gates[2] = {{sim::GateKind::X90, "x90", 4, 16}, {sim::GateKind::X180, "x180", 2, 8}};

        for (int g = 0; g < 2; ++g) {
            const std::uint64_t base = 20 + static_cast<std::uint64_t>(q) * 8 +
                                       static_cast<std::uint64_t>(g) * 4;
            const proto::StackScan coarse =
                proto::stack_scan(ctx.backend, gates[g].gate, q, gates[g].coarse_stack,
                                  {lo, hi, coarse_points}, shots, root.fork(base).key());
            const double center = coarse.optimum_amp;
            const proto::StackScan fine = proto::stack_scan(
                ctx.backend, gates[g].gate, q, gates[g].fine_stack,
                {center * (1.0 - window), center * (1.0 + window), fine_points}, shots,
                root.fork(base + 1).key());

            data[std::string(gates[g].name) + "_amp"] = fine.optimum_amp;
            data[std::string(gates[g].name) + "_coarse_amp"] = center;

            for (const proto::StackScan* s : {&coarse, &fine}) {
                const char* stage_name = s == &coarse ? "coarse" : "fine";
                json c;
                c["gate"] = gates[g].name;
                c["stage"] = stage_name;
                c["n_stack"] = s->n_stack;
                c["amp"] = s->amps;
                c["p1"] = s->p1;
                c["optimum_amp"] = s->optimum_amp;
                curves.push_back(c);
                curve_points += static_cast<int>(s->amps.size());
                for (std::size_t i = 0; i < s->amps.size(); ++i)
                    rows.push_back(std::string(gates[g].name) + "," + stage_name + "," +
                                   fmt(s->amps[i]) + "," + fmt(s->p1[i]));
            }
        }

        const auto rec =
            ctx.store->append("q" + std::to_string(q), "finetune", prov_for(ctx, "finetune"), data);

        json art = data;
        art["curves"] = curves;
        art["points"] = curve_points;
        write_json_artifact(ctx.out_dir / ("finetune_q" + std::to_string(q) + ".json"), art);
        write_csv(ctx.out_dir / ("finetune_q" + std::to_string(q) + ".csv"), "gate,stage,amp,p1",
                  rows);
        std::fprintf(stderr, "finetune q%d: x90 amp %.6f, x180 amp %.6f (record %s)\n", q,
                     data["x90_amp"].get<double>(), data["x180_amp"].get<double>(),
                     run_ref(rec).c_str());
    }
    return 0;
}

proto::GateCal cal_from_records(Ctx& ctx, const std::string& for_stage, json* sources) {
    proto::GateCal cal;
    for (int q = 0; q < 2; ++q) {
        const auto arec = apply_recorded_bias(ctx, q, for_stage);
        const auto frec = need_record(ctx, "q" + std::to_string(q), "finetune", for_stage);
        const double amp = frec.data.at("x90_amp").get<double>();
        if (q == 0) cal.x90_amp_q0 = amp;
        else cal.x90_amp_q1 = amp;
        if (sources != nullptr) {
            (*sources)["autorabi_q" + std::to_string(q)] = run_ref(arec);
            (*sources)["finetune_q" + std::to_string(q)] = run_ref(frec);
        }
    }
    return cal;
}

int stage_crsweep(Ctx& ctx) {
    const json sc = cfg_section(ctx, "crsweep");
    json sources = json::object();
    const proto::GateCal cal = cal_from_records(ctx, "crsweep", &sources);

    proto::AmpRange coarse{sc.value("coarse_lo", 0.3), sc.value("coarse_hi", 2.0),
                           sc.value("coarse_points", 18)};
    rng::Stream root(ctx.seed);
    const proto::CrSweep sweep = proto::cr_amplitude_sweep(
        ctx.backend, cal, coarse, sc.value("fine_halfwidth", 0.22), sc.value("fine_points", 19),
        sc.value("shots", 2000), root.fork(30).key());

    json data;
    data["cr_amp"] = sweep.optimal_amp;
    data["vertex_r"] = sweep.parabola.vertex_y;
    data["curvature"] = sweep.parabola.curvature;
    data["sources"] = sources;

    const auto rec = ctx.store->append("q0q1", "crsweep", prov_for(ctx, "crsweep"), data);

    std::vector<std::string> rows;
    json stages = json::array();
    for (const proto::CrSweepStage* s : {&sweep.coarse, &sweep.fine}) {
        const char* name = s == &sweep.coarse ? "coarse" : "fine";
        stages.push_back(json{{"stage", name},
                              {"n_pulses", s->n_pulses},
                              {"amp", s->amps},
                              {"r", s->r}});
        for (std::size_t i = 0; i < s->amps.size(); ++i)
            rows.push_back(std::string(name) + "," + std::to_string(s->n_pulses) + "," +
                           fmt(s->amps[i]) + "," + fmt(s->r[i]));
    }
    json art = data;
    art["stages"] = stages;
    write_json_artifact(ctx.out_dir / "crsweep.json", art);
    write_csv(ctx.out_dir / "crsweep.csv", "stage,n_pulses,amp,r", rows);
    std::fprintf(stderr, "crsweep: optimal per-pulse amplitude %.6f (record %s)\n",
                 sweep.optimal_amp, run_ref(rec).c_str());
    return 0;
}

int stage_xyfit(Ctx& ctx) {
    const json sc = cfg_section(ctx, "xyfit");
    json sources = json::object();
    const proto::GateCal cal = cal_from_records(ctx, "xyfit", &sources);
    const auto crec = need_record(ctx, "q0q1", "crsweep", "xyfit");
    sources["crsweep"] = run_ref(crec);

    proto::CnotOptions opts;
    opts.preset_cr_amp = crec.data.at("cr_amp").get<double>();
    opts.xy_angles = sc.value("angles", 24);
    opts.xy_shots = sc.value("shots", 2000);
    opts.mitigation_shots = sc.value("mitigation_shots", 20000);
    opts.verify_tol = sc.value("verify_tol", 0.03);
    rng::Stream root(ctx.seed);
    opts.seed = root.fork(40).key();

    const proto::CnotCalibration res = proto::calibrate_cnot(ctx.backend, cal, opts);

    json data;
    data["cr_amp"] = opts.preset_cr_amp;
    data["first_fit"] = xyfit_to_json(res.first_fit);
    data["corrections"] = angles_to_json(res.corrections);
    data["verify_fit"] = xyfit_to_json(res.verify_fit);
    data["verify_max_abs"] = res.verify_max_abs;
    data["mitigation"] = json{{"eps0", res.mitigation.eps0}, {"eps1", res.mitigation.eps1}};
    data["sources"] = sources;

    const auto rec = ctx.store->append("q0q1", "xyfit", prov_for(ctx, "xyfit"), data);

    std::vector<std::string> rows;
    json curves = json::array();
    const struct {
        const char* name;
        const proto::XyCurve* c;
    } phases[2] = {{"first", &res.first_curve}, {"verify", &res.verify_curve}};
    for (const auto& ph : phases) {
        json c;
        c["phase"] = ph.name;
        c["phi"] = ph.c->phi;
        json pts = json::array();
        for (std::size_t i = 0; i < ph.c->phi.size(); ++i) {
            pts.push_back(ph.c->p[i]);
            rows.push_back(std::string(ph.name) + "," + fmt(ph.c->phi[i]) + "," +
                           fmt(ph.c->p[i][0]) + "," + fmt(ph.c->p[i][1]) + "," +
                           fmt(ph.c->p[i][2]) + "," + fmt(ph.c->p[i][3]));
        }
        c["p"] = pts;
        curves.push_back(c);
    }
    json art = data;
    art["curves"] = curves;
    write_json_artifact(ctx.out_dir / "xyfit.json", art);
    write_csv(ctx.out_dir / "xyfit.csv", "phase,phi,p00,p01,p10,p11", rows);
    std::fprintf(stderr,
                 "xyfit: corrections (%.4f, %.4f, %.4f, %.4f), verify residual %.4f rad "
                 "(record %s)\n",
                 res.corrections.theta1, res.corrections.theta2, res.corrections.theta3,
                 res.corrections.theta4, res.verify_max_abs, run_ref(rec).c_str());
    return 0;
}

int stage_rb(Ctx& ctx) {
    const json sc = cfg_section(ctx, "rb");
    rb::NoiseSpec inject = ctx.inject;
    if (!ctx.inject_given && sc.contains("inject")) {
        inject.depolarizing = sc.at("inject").value("depolarizing", 0.0);
        inject.amp_damp = sc.at("inject").value("amp_damp", 0.0);
        inject.coherent = sc.at("inject").value("coherent", 0.0);
    }

    rb::RbOptions opts;
    opts.n_qubits = sc.value("n_qubits", 1);
    opts.lengths = sc.value("lengths", std::vector<int>{2, 4, 8, 16, 32, 64, 128});
    opts.circuits_per_length = sc.value("circuits_per_length", 15);
    opts.shots = sc.value("shots", 400);
    rng::Stream root(ctx.seed);
    opts.seed = root.fork(50).key();
    opts.noise = inject;
    const int d = opts.n_qubits == 1 ? 2 : 4;

    std::fprintf(stderr, "rb: %d-qubit, inject depolarizing=%g amp_damp=%g coherent=%g\n",
                 opts.n_qubits, inject.depolarizing, inject.amp_damp, inject.coherent);

    const rb::RbResult ref = rb::srb(opts);

    rb::RbOptions iopts = opts;
    iopts.seed = root.fork(51).key();
    iopts.target_noise = inject; // the interleaved gate suffers the same channel
    const rb::RbResult inter = rb::irb(
        opts.n_qubits == 1 ? rb::IrbTarget::X90 : rb::IrbTarget::Cnot, ref.fit.p, ref.fit.p_err,
        iopts);

    rb::RbOptions xopts = opts;
    xopts.seed = root.fork(52).key();
    xopts.shots = 0; // purity is computed, not sampled
    const rb::RbResult unitarity = rb::xrb(xopts);
    const rb::XrbSplit split = rb::xrb_split(opts.n_qubits, ref.fit.p, unitarity.fit.p);

    json data;
    data["n_qubits"] = opts.n_qubits;
    data["inject"] = json{{"depolarizing", inject.depolarizing},
                          {"amp_damp", inject.amp_damp},
                          {"coherent", inject.coherent}};
    data["srb"] = json{{"p", ref.fit.p},
                       {"p_err", ref.fit.p_err},
                       {"process_infidelity", ref.process_infidelity}};
    data["irb"] = json{{"p", inter.fit.p},
                       {"p_err", inter.fit.p_err},
                       {"target", opts.n_qubits == 1 ? "x90" : "cnot"},
                       {"gate_infidelity", inter.gate_infidelity},
                       {"gate_infidelity_err", inter.gate_infidelity_err},
                       {"nonphysical", inter.nonphysical}};
    data["xrb"] = json{{"u", unitarity.fit.p},
                       {"e_f", split.e_f},
                       {"e_s", split.e_s},
                       {"e_u", split.e_u}};

    const std::string id = opts.n_qubits == 1 ? "q0" : "q0q1";
    const auto rec = ctx.store->append(id, "rb", prov_for(ctx, "rb"), data);

    std::vector<std::string> rows;
    json series = json::array();
    const struct {
        const char* name;
        const rb::RbResult* r;
    } protos[3] = {{"srb", &ref}, {"irb", &inter}, {"xrb", &unitarity}};
    int n_points = 0;
    for (const auto& pr : protos) {
        json pts = json::array();
        for (const rb::RbPoint& pt : pr.r->points) {
            pts.push_back(json{{"m", pt.m}, {"survival", pt.survival}});
            rows.push_back(std::string(pr.name) + "," + std::to_string(pt.m) + "," +
                           fmt(pt.survival));
            ++n_points;
        }
        series.push_back(json{{"protocol", pr.name}, {"points", pts}});
    }
    json art = data;
    art["series"] = series;
    art["points"] = n_points;
    write_json_artifact(ctx.out_dir / "rb.json", art);
    write_csv(ctx.out_dir / "rb.csv", "protocol,m,survival", rows);
    std::fprintf(stderr,
                 "rb: srb p=%.5f, irb gate infidelity %.5f +- %.5f (d=%d), xrb u=%.5f "
                 "(record %s)\n",
                 ref.fit.p, inter.gate_infidelity, inter.gate_infidelity_err, d, unitarity.fit.p,
                 run_ref(rec).c_str());
    return 0;
}

int stage_pipeline(Ctx& ctx) {
    stage_autorabi(ctx);
    stage_finetune(ctx);
    stage_crsweep(ctx);
    stage_xyfit(ctx);
    stage_rb(ctx);

    // merged calibration summary: every field points back at its run
    json data;
    for (int q = 0; q < 2; ++q) {
        const std::string id = "q" + std::to_string(q);
        const auto arec = need_record(ctx, id, "autorabi", "pipeline");
        const auto frec = need_record(ctx, id, "finetune", "pipeline");
        data["bias"][id] = json{{"value", arec.data.at("final_bias")}, {"run", run_ref(arec)}};
        data["x90_amp"][id] =
            json{{"value", frec.data.at("x90_amp")}, {"run", run_ref(frec)}};
        data["x180_amp"][id] =
            json{{"value", frec.data.at("x180_amp")}, {"run", run_ref(frec)}};
    }
    const auto crec = need_record(ctx, "q0q1", "crsweep", "pipeline");
    data["cr_amp"] = json{{"value", crec.data.at("cr_amp")}, {"run", run_ref(crec)}};
    const auto xrec = need_record(ctx, "q0q1", "xyfit", "pipeline");
    data["cnot_angles"] =
        json{{"value", xrec.data.at("corrections")}, {"run", run_ref(xrec)}};
    const json rb_cfg = cfg_section(ctx, "rb");
    const auto rrec = need_record(ctx, rb_cfg.value("n_qubits", 1) == 1 ? "q0" : "q0q1", "rb",
                                  "pipeline");
    data["rb"] = json{{"value", rrec.data}, {"run", run_ref(rrec)}};

    const auto rec = ctx.store->append("q0q1", "pipeline", prov_for(ctx, "pipeline"), data);
    std::fprintf(stderr, "pipeline: complete (record %s)\n", run_ref(rec).c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"calibration pipeline for a simulated two-qubit superconducting device"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path, out_dir, store_path, inject_spec, truth_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_dir, "output directory for JSON/CSV artifacts");
    app.add_option("--seed", seed, "master seed (overrides config)")
        ->each([&seed_given](const std::string&) { seed_given = true; });
    app.add_option("--store", store_path,
                   "record store path (overrides QCAL_STORE and config)");
    app.add_option("--inject", inject_spec,
                   "rb noise channels, e.g. depolarizing=0.01,coherent=0.02");
    app.add_option("--truth", truth_path, "device truth JSON (overrides config)");

    CLI::App* sub_autorabi = app.add_subcommand("autorabi", "bias search on each qubit");
    CLI::App* sub_finetune =
        app.add_subcommand("finetune", "gate-stacking amplitude fine tune");
    CLI::App* sub_crsweep = app.add_subcommand("crsweep", "cross-resonance amplitude sweep");
    CLI::App* sub_xyfit = app.add_subcommand("xyfit", "full XY-plane CNOT extraction");
    CLI::App* sub_rb = app.add_subcommand("rb", "randomized benchmarking on an error channel");
    CLI::App* sub_pipeline =
        app.add_subcommand("pipeline", "run all stages in dependency order");

    CLI11_PARSE(app, argc, argv);

    try {
        Ctx ctx;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in.is_open())
                throw std::invalid_argument("cannot open config " + config_path);
            in >> ctx.cfg;
        }
        ctx.seed = seed_given ? seed : ctx.cfg.value("seed", std::uint64_t{1});
        ctx.out_dir = !out_dir.empty() ? fs::path(out_dir)
                                       : fs::path(ctx.cfg.value("out_dir", std::string{"out"}));
        fs::create_directories(ctx.out_dir);

        std::string store;
        if (!store_path.empty()) store = store_path;
        else if (const char* env = std::getenv("QCAL_STORE"); env != nullptr && *env != '\0')
            store = env;
        else if (ctx.cfg.contains("store"))
            store = ctx.cfg.at("store").get<std::string>();
        else
            store = (ctx.out_dir / "records.jsonl").string();
        ctx.store = std::make_unique<rec::RecordStore>(store);

        std::string truth = truth_path;
        if (truth.empty() && ctx.cfg.contains("truth"))
            truth = ctx.cfg.at("truth").get<std::string>();
        ctx.backend = truth.empty() ? sim::Backend{} : sim::Backend::from_json_file(truth);

        if (!inject_spec.empty()) {
            ctx.inject = parse_inject(inject_spec);
            ctx.inject_given = true;
        }

        if (sub_autorabi->parsed()) return stage_autorabi(ctx);
        if (sub_finetune->parsed()) return stage_finetune(ctx);
        if (sub_crsweep->parsed()) return stage_crsweep(ctx);
        if (sub_xyfit->parsed()) return stage_xyfit(ctx);
        if (sub_rb->parsed()) return stage_rb(ctx);
        if (sub_pipeline->parsed()) return stage_pipeline(ctx);
        std::fprintf(stderr, "error: no subcommand\n");
        return 2;
    } catch (const DependencyError& e) {
        std::fprintf(stderr, "dependency error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
