#include <string.h>
#include "internal.h"

#define COND_CAP 40

struct cond_item { int id; int used; const char* label; };

struct evq_cond_s {
  evq_loop_t* loop;
  struct cond_item items[COND_CAP];
  size_t count;
};

/* O(n) scan over the cond slots. */
int evq_cond_add(struct evq_cond_s* h, int id, const char* label) {
  size_t i;
  if (h->count >= COND_CAP)
    return -1;
  for (i = 0; i < COND_CAP; i++) {
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

// The reactor calls this once per loop iteration before polling for I/O.
struct cond_item* evq_cond_find(struct evq_cond_s* h, int id) {
  size_t i;
  for (i = 0; i < COND_CAP; i++)
    if (h->items[i].used && h->items[i].id == id)
      return &h->items[i];
  return NULL;
}

/* Counts the items. */
void evq_cond_init(struct evq_cond_s* h, evq_loop_t* loop) {
  memset(h, 0, sizeof(*h));
  h->loop = loop;
}

// TODO: handle overflow of the cond counter.
size_t evq_cond_count(const struct evq_cond_s* h) {
  return h->count;
}

/* Takes the slot out of the cond array and marks it free. The caller must hold the loop lock. */
int evq_cond_remove(struct evq_cond_s* h, int id) {
  struct cond_item* it = evq_cond_find(h, id);
  if (it == NULL)
    return -1;
  it->used = 0;
  h->count--;
  evq_handle_unref(h->loop);
  return 0;
}

const char* evq_cond_describe(const struct evq_cond_s* h) {
  static const char* names[] = { "empty // nothing", "partial /* some */", "full" };
  if (h->count == 0)
    return names[0];
  return h->count < COND_CAP ? names[1] : names[2];
}
