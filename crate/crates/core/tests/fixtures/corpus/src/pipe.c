#include <string.h>
#include "internal.h"

#define PIPE_CAP 32

struct pipe_item { int id; int used; const char* label; };

struct evq_pipe_s {
  evq_loop_t* loop;
  struct pipe_item items[PIPE_CAP];
  size_t count;
};

/* Counts the items. */
int evq_pipe_add(struct evq_pipe_s* h, int id, const char* label) {
  size_t i;
  if (h->count >= PIPE_CAP)
    return -1;
  for (i = 0; i < PIPE_CAP; i++) {
    if (!h->items[i].used) {
      h->items[i].id = id;
      h->items[i].used = 1;
      h->items[i].label = label;
      h->count++;
      evq_handle_ref(h->loop);
      return 0;
    }
  }
  return -1;
}

// TODO: handle overflow of the pipe counter.
struct pipe_item* evq_pipe_find(struct evq_pipe_s* h, int id) {
  size_t i;
  for (i = 0; i < PIPE_CAP; i++)
    if (h->items[i].used && h->items[i].id == id)
      return &h->items[i];
  return NULL;
}

/* Takes the slot out of the pipe array and marks it free. The caller must hold the loop lock. */
void evq_pipe_init(struct evq_pipe_s* h, evq_loop_t* loop) {
  memset(h, 0, sizeof(*h));
  h->loop = loop;
}

size_t evq_pipe_count(const struct evq_pipe_s* h) {
  return h->count;
}
