void update_user_profile(struct user *user, const char *name)
{
	if (!user || !name)
		return;
	strcpy(user->name, name);
	user->last_updated = time(NULL);
}
