/* Copyright (c) the bbc project contributors. */
/* Licensed under the Apache 2.0 License. */

#ifndef BBC_H
#define BBC_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Binary consensus toolkit: a signed-vote consensus engine plus the
 * simulation, experiment and networking drivers built around it.  All
 * functions are synchronous.  Functions returning bbc_status report
 * failure details through bbc_last_error(); strings handed out through
 * char** parameters are heap-allocated and released with bbc_string_free.
 */

typedef enum bbc_status {
  BBC_OK = 0,
  BBC_ERR_ARGUMENT = 1, /* bad parameter or unparsable input */
  BBC_ERR_MISUSE = 2,   /* call sequence the protocol forbids */
  BBC_ERR_IO = 3,       /* filesystem or socket trouble */
  BBC_ERR_RUNTIME = 4   /* anything else */
} bbc_status;

const char* bbc_version(void);
/* Message describing this thread's most recent failure. */
const char* bbc_last_error(void);
void bbc_string_free(char* s);

/* ---------------------------------------------------------------- engine */

typedef struct bbc_engine bbc_engine;

typedef struct bbc_engine_config {
  uint32_t n;            /* process count */
  uint32_t t;            /* tolerated faults, must satisfy 3t < n */
  uint32_t process_id;   /* this process, in [0, n) */
  uint64_t instance_id;
  uint64_t timer_base;   /* first timed round's timer length */
  uint64_t timer_growth; /* added per timer index past the free rounds */
  uint32_t free_rounds;  /* leading rounds with zero timers and no coordinator */
  int stop_policy;       /* 0 hold certificate, 1 send on decide, 2 never stop */
  const char* scheme;    /* "mock" or "ed25519"; NULL means "mock" */
  uint64_t keyring_seed; /* all n keypairs derive deterministically from this */
} bbc_engine_config;

bbc_status bbc_engine_new(const bbc_engine_config* cfg, bbc_engine** out);
void bbc_engine_free(bbc_engine* e);

/* Inputs.  Each call appends the resulting effects to the engine's effect
 * queue; drain it with bbc_engine_next_effect. */
bbc_status bbc_engine_start(bbc_engine* e, uint8_t proposal);
bbc_status bbc_engine_deliver_vote(bbc_engine* e, const uint8_t* data, size_t size);
bbc_status bbc_engine_deliver_cert(bbc_engine* e, const uint8_t* data, size_t size);
bbc_status bbc_engine_timer_fired(bbc_engine* e, uint32_t timer_index);

enum {
  BBC_EFFECT_BROADCAST_VOTE = 1, /* data/size: wire-encoded vote message */
  BBC_EFFECT_BROADCAST_CERT = 2, /* data/size: wire-encoded certificate */
  BBC_EFFECT_ARM_TIMER = 3,      /* timer_index/timer_duration */
  BBC_EFFECT_DECIDE = 4,         /* value/round */
  BBC_EFFECT_STOPPED = 5
};

typedef struct bbc_effect {
  int kind;
  uint32_t timer_index;
  uint64_t timer_duration;
  uint8_t value;
  uint32_t round;
  const uint8_t* data; /* valid until the next call on the same engine */
  size_t size;
} bbc_effect;

/* Pops one effect; returns 1 when an effect was written, 0 when empty. */
int bbc_engine_next_effect(bbc_engine* e, bbc_effect* out);

/* Returns 1 and fills value/round once this process has decided. */
int bbc_engine_decided(const bbc_engine* e, uint8_t* value, uint32_t* round);
uint32_t bbc_engine_round(const bbc_engine* e);

/* ----------------------------------------------------------------- tools */

/* Writes directory.txt plus one private key file per process. */
bbc_status bbc_keygen(const char* scheme, uint32_t n, uint64_t seed, const char* out_dir);

/* Runs the experiment described by a scenario file; *summary receives the
 * human-readable report.  A safety violation yields BBC_ERR_RUNTIME with
 * the summary still filled in. */
bbc_status bbc_sim_run_file(const char* scenario_path, char** summary);

/* Randomized adversarial runs; *violations receives the number of safety
 * violations found (0 for a healthy build). */
bbc_status bbc_fuzz(uint64_t iterations, uint64_t seed, char** summary, uint64_t* violations);

/* Verifies the closed-form message count against fault-free runs.
 * *ok receives 1 when every row matches. */
bbc_status bbc_check_messages(char** summary, int* ok);

/* ------------------------------------------------------------- processes */

typedef struct bbc_node_options {
  uint32_t id;
  const char* peers_path;  /* "index host port" lines, one per process */
  const char* keys_dir;
  uint32_t instances;
  const char* proposal; /* "0", "1" or "random:<p>" */
  int lazy_proofs;
  uint64_t timer_base;
  uint64_t timer_growth;
  uint32_t coord_free_rounds;
  const char* wal_path; /* NULL or empty disables durability */
  uint64_t seed;
  uint32_t retransmit_ms; /* 0 keeps the default */
  uint32_t linger_ms;     /* 0 keeps the default */
  uint64_t deadline_ms;   /* 0 keeps the default */
} bbc_node_options;

/* Runs a consensus process until its instances decide; returns the process
 * exit code (0 ok, 2 deadline, 3 round cap, 64 bad config, 65 bad WAL). */
int bbc_node_run(const bbc_node_options* opts);

typedef struct bbc_proxy_options {
  const char* listen_path;
  const char* targets_path;
  double drop;
  uint64_t seed;
} bbc_proxy_options;

/* Lossy datagram forwarder; blocks until killed or orphaned. */
int bbc_proxy_run(const bbc_proxy_options* opts);

typedef struct bbc_spawn_options {
  uint32_t n;
  const char* exe;       /* binary launched for node/proxy children */
  const char* work_dir;  /* NULL: fresh temp dir */
  const char* proposals; /* comma-separated per-node specs, NULL: random:0.5 */
  uint32_t instances;
  int lazy_proofs;
  double lossy_drop;
  uint64_t seed;
  const char* scheme; /* NULL means "ed25519" */
  uint64_t timer_base;
  uint64_t timer_growth;
  uint32_t coord_free_rounds;
  uint32_t retransmit_ms;
  uint32_t linger_ms;
  int kill_id; /* -1 disables the crash schedule */
  uint64_t kill_after_ms;
  uint64_t restart_after_ms; /* 0: never restart */
  int wrong_keys_id;         /* -1 disables */
  uint64_t deadline_ms;
  int keep_work_dir;
} bbc_spawn_options;

/* Spawns n node processes (plus a proxy when lossy_drop > 0), collects
 * their result lines, and checks agreement.  *ok receives 1 when every
 * surviving node decided consistently. */
bbc_status bbc_spawn_local(const bbc_spawn_options* opts, char** summary, int* ok);

#ifdef __cplusplus
}
#endif

#endif /* BBC_H */
